"""Infrastructure layer for replictl: file system repositories."""

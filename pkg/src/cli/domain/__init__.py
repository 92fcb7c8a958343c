"""Domain layer for replictl: entities and repository interfaces."""

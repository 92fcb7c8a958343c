"""Interface layer for replictl: command handlers and presentation."""

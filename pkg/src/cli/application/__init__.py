"""Application layer for replictl: analysis and simulation use cases."""

"""Balanced off-policy evaluation for contextual bandits."""
__version__ = "0.1.0"

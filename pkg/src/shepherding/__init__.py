"""Obstacle-aware shepherding of non-cohesive targets."""

__version__ = "0.1.0"

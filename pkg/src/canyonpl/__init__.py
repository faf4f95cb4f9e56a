"""Path-loss prediction for urban street canyons from clutter point clouds and building footprints."""

__version__ = "0.1.0"

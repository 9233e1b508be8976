"""Reset-minimizing reinforcement learning on a planar tabletop task."""

__version__ = "0.1.0"

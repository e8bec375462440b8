"""Non-interactive figure scripts over the simulation CSV schemas."""

__version__ = "0.1.0"

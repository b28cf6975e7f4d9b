"""Sound field estimation around a rigid spherical microphone array by kernel ridge regression."""

__version__ = "0.1.0"

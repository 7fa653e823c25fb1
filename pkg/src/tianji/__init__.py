"""Tournament engine and analysis toolkit for the simultaneous horse-selection game."""

__version__ = "0.1.0"

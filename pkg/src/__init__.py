"""shiftlab: referring relationships via learned attention shifts."""

__version__ = "0.1.0"

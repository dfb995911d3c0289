"""Multi-axis evaluation of decompiled C: readability, recompilability, functionality."""

__version__ = "0.1.0"

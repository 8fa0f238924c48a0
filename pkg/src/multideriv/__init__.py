"""Two-derivative implicit time stepping with LDG (1D) and HDG (2D) discretizations."""
__version__ = "0.1.0"

"""Oriented-texture-curve mean-shift tracker."""
__version__ = "0.1.0"

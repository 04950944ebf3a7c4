"""Quantum and classical recurrent forecasters for short financial series."""
__version__ = "0.1.0"

"""gapforge: Bloch band structures and spectral gap optimization."""

__version__ = "1.0.0"

"""Motor de rotulagem fraca para desfechos de ensaios clínicos."""

__version__ = "0.1.0"

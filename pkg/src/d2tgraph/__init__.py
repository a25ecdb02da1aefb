"""Structure-aware data-to-text: unified graphs, structural attention/position matrices, a numpy T5-style model."""

__version__ = "0.1.0"

"""Masked-LM scoring server and fine-tuning for the fill-mask wire protocol."""

__version__ = "0.1.0"

"""Fully-qualified type name inference for partial Java code.

The package turns partial code into masked fill-in-blank prompts, sweeps
variable-length mask spans over a pluggable fill-mask scorer, and decodes
the best-scoring span back into a fully-qualified name.
"""

__version__ = "0.1.0"

from fqninfer.errors import FqnInferError

__all__ = ["FqnInferError", "__version__"]

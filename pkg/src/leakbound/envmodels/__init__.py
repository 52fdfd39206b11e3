"""Models of library and kernel functions with concrete and symbolic semantics.

The registry lives in :mod:`leakbound.envmodels.builtins`; it is not imported
here so that the type layer can use :mod:`.padding` without a cycle.
"""

from .padding import arch_align, padding_bytes

__all__ = ["arch_align", "padding_bytes"]

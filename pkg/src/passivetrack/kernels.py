"""Hot-loop kernels, compiled when available.

The Cython extension ``passivetrack._kernels`` is used if it imports;
otherwise the numpy implementation in ``_fallback`` takes over. Setting
``PASSIVETRACK_PURE_PYTHON=1`` forces the fallback.
"""

import os

from . import _fallback

BACKEND = "python"
block_products = _fallback.block_products

if not os.environ.get("PASSIVETRACK_PURE_PYTHON"):
    try:
        from . import _kernels
    except ImportError:
        pass
    else:
        block_products = _kernels.block_products
        BACKEND = "cython"

__all__ = ["BACKEND", "block_products"]

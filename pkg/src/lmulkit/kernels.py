"""Kernel backend chosen at import: compiled if built, else pure Python.

Set ``LMULKIT_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

from . import _pykernels

if os.environ.get("LMULKIT_PURE_PYTHON"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND: str = _impl.BACKEND
xorshift64star_fill = _impl.xorshift64star_fill
lmul_bits_batch = _impl.lmul_bits_batch

__all__ = ["BACKEND", "xorshift64star_fill", "lmul_bits_batch"]

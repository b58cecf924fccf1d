"""Kernel backend selection.

The compiled extension is used when available; set ``LINENS_FORCE_PURE=1``
to force the numpy fallback (useful for benchmarking and debugging).
"""

from __future__ import annotations

import os

if os.environ.get("LINENS_FORCE_PURE"):
    from . import _kernels_py as kernels
else:
    try:
        from . import _kernels as kernels  # type: ignore[no-redef]
    except ImportError:
        from . import _kernels_py as kernels  # type: ignore[no-redef]

HAVE_COMPILED_KERNELS: bool = kernels.IS_COMPILED

__all__ = ["kernels", "HAVE_COMPILED_KERNELS"]

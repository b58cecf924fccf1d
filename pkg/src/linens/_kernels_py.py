"""Pure numpy implementations of the per-step simulation kernels.

These mirror the compiled extension in ``_kernels.pyx``; the active
implementation is chosen in :mod:`linens.backend`.
"""

from __future__ import annotations

import numpy as np

IS_COMPILED = False


def rank1_update(gram: np.ndarray, gram_inv: np.ndarray, x: np.ndarray) -> None:
    """In-place rank-1 update of a Gram matrix and its inverse.

    ``gram`` gains ``x x^T``; ``gram_inv`` is corrected with the rank-1
    inverse identity so it stays the inverse of ``gram``.
    """
    gram += np.outer(x, x)
    u = gram_inv @ x
    denom = 1.0 + float(x @ u)
    gram_inv -= np.outer(u, u) / denom


def quad_form(mat: np.ndarray, v: np.ndarray) -> float:
    """Return ``v^T mat v``."""
    return float(v @ (mat @ v))


def accumulate_perturbed(s: np.ndarray, x: np.ndarray, yz: np.ndarray) -> None:
    """Add ``x * yz[j]`` to row ``j`` of ``s``, for every row."""
    s += yz[:, None] * x[None, :]

"""Small linear-algebra helpers shared by the moment and estimator modules."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .exceptions import DimensionMismatchError, InvalidDimensionError


def as_square(a, name: str = "matrix") -> np.ndarray:
    """Return ``a`` as a finite float square 2-D array."""
    arr = np.asarray(a, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise InvalidDimensionError(f"{name} must be square, got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise InvalidDimensionError(f"{name} must have dimension >= 1")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def common_dim(*mats: np.ndarray) -> int:
    dims = {m.shape[0] for m in mats}
    if len(dims) != 1:
        raise DimensionMismatchError(f"matrices have differing dimensions {sorted(dims)}")
    return dims.pop()


def trace_product(mats: Sequence[np.ndarray]) -> float:
    """tr(M_1 M_2 ... M_k), multiplying left to right.

    The last product is never formed; only its diagonal is needed.
    """
    if len(mats) == 1:
        return float(np.trace(mats[0]))
    acc = mats[0]
    for m in mats[1:-1]:
        acc = acc @ m
    return float(np.einsum("ij,ji->", acc, mats[-1]))


def canonical_rotation(word: Sequence) -> tuple:
    """Lexicographically smallest cyclic rotation of ``word``."""
    w = tuple(word)
    return min(w[i:] + w[:i] for i in range(len(w)))


def relative_asymmetry(a: np.ndarray) -> float:
    scale = np.linalg.norm(a)
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(a - a.T) / scale)

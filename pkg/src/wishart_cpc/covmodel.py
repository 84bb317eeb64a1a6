"""Covariance families and finite-p trace diagnostics.

Builds positive-definite covariance parameters (identity, AR(1) Toeplitz,
diagonal pairs with optional Givens rotations) and evaluates normalized trace
words ``tr(S_1 ... S_k) / p``, including the CPC discrepancy ``theta_p``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from ._linalg import as_square, canonical_rotation, relative_asymmetry, trace_product
from .exceptions import (
    DimensionMismatchError,
    InvalidDimensionError,
    InvalidParameterError,
    NotPositiveDefiniteError,
)

SYMMETRY_RTOL = 1e-12
COMMUTE_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class SpdMatrix:
    """Symmetric positive-definite ``p x p`` matrix.

    The entries are symmetrized on construction and stored read-only.
    Positive definiteness is checked by attempting a Cholesky factorization.
    """

    entries: np.ndarray

    def __post_init__(self):
        a = as_square(self.entries, "SpdMatrix")
        if relative_asymmetry(a) > SYMMETRY_RTOL:
            raise InvalidParameterError(
                f"matrix is not symmetric (relative asymmetry {relative_asymmetry(a):.3g})"
            )
        a = 0.5 * (a + a.T)
        try:
            np.linalg.cholesky(a)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefiniteError("matrix is not positive definite") from exc
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.entries
        return self.entries.astype(dtype)

    def to_dict(self) -> dict:
        return {"dim": self.dim, "entries": self.entries.tolist()}

    @classmethod
    def from_dict(cls, payload: Mapping) -> "SpdMatrix":
        entries = np.asarray(payload["entries"], dtype=float)
        if "dim" in payload and entries.shape != (payload["dim"], payload["dim"]):
            raise InvalidDimensionError(
                f"declared dim {payload['dim']} does not match entries of shape {entries.shape}"
            )
        return cls(entries)


@dataclass(frozen=True, eq=False)
class CovariancePair:
    """Two covariance matrices of a CPC problem.

    ``commuting`` records whether the pair was built to satisfy the null
    (shared eigenvectors); when set it is verified numerically.
    """

    sigma_x: SpdMatrix
    sigma_y: SpdMatrix
    commuting: bool = False

    def __post_init__(self):
        if self.sigma_x.dim != self.sigma_y.dim:
            raise DimensionMismatchError("sigma_x and sigma_y must share dimension")
        if self.commuting and not _commutes(self.sigma_x.entries, self.sigma_y.entries):
            raise InvalidParameterError("pair flagged commuting but the matrices do not commute")

    @property
    def dim(self) -> int:
        return self.sigma_x.dim


@dataclass(frozen=True)
class RatioDiagnostics:
    """Normalized trace words ``tr(prod) / p`` keyed by label tuple."""

    values: dict = field(default_factory=dict)
    dim: int = 0

    def __getitem__(self, word) -> float:
        return self.values[_as_word(word)]

    def __contains__(self, word) -> bool:
        return _as_word(word) in self.values

    def __len__(self) -> int:
        return len(self.values)

    def items(self):
        return self.values.items()

    def to_dict(self) -> dict:
        return {"dim": self.dim, "ratios": {"".join(map(str, k)) if all(len(str(s)) == 1 for s in k)
                                            else ",".join(map(str, k)): v
                                            for k, v in self.values.items()}}


def _commutes(a: np.ndarray, b: np.ndarray) -> bool:
    comm = a @ b - b @ a
    return np.linalg.norm(comm) <= COMMUTE_RTOL * np.linalg.norm(a) * np.linalg.norm(b)


def _as_word(word) -> tuple:
    if isinstance(word, str):
        return tuple(word) if "," not in word else tuple(s.strip() for s in word.split(","))
    return tuple(word)


def make_identity(p: int) -> SpdMatrix:
    if int(p) != p or p < 1:
        raise InvalidDimensionError(f"p must be a positive integer, got {p!r}")
    return SpdMatrix(np.eye(int(p)))


def givens_rotation(p: int, plane: tuple[int, int], angle: float) -> np.ndarray:
    """``p x p`` rotation by ``angle`` radians in coordinate plane ``(i, j)``."""
    i, j = plane
    if not (0 <= i < j < p):
        raise InvalidParameterError(f"rotation plane {plane} invalid for p={p}; need 0 <= i < j < p")
    r = np.eye(p)
    c, s = math.cos(angle), math.sin(angle)
    r[i, i] = c
    r[j, j] = c
    r[i, j] = -s
    r[j, i] = s
    return r


def make_cpc_pair(
    eigvals_x,
    eigvals_y,
    rotation_angle: float | None = None,
    rotation_plane=None,
    seed: int | None = None,
) -> CovariancePair:
    """Diagonal covariance pair, optionally rotating ``sigma_y`` off the shared basis.

    Parameters
    ----------
    eigvals_x, eigvals_y : array-like of length p
        Strictly positive eigenvalues.
    rotation_angle : float, optional
        Givens angle in radians applied to ``sigma_y``.
    rotation_plane : pair of ints or sequence of pairs, optional
        Coordinate plane(s) of the rotation. Several disjoint planes may be
        given; each is rotated by ``rotation_angle``. When omitted together
        with a ``seed``, a single plane is drawn at random.
    seed : int, optional
        Only used to draw a random plane.
    """
    lx = np.asarray(eigvals_x, dtype=float).ravel()
    ly = np.asarray(eigvals_y, dtype=float).ravel()
    if lx.shape != ly.shape or lx.size == 0:
        raise InvalidDimensionError("eigenvalue vectors must be non-empty and of equal length")
    if np.any(lx <= 0) or np.any(ly <= 0) or not np.all(np.isfinite(np.r_[lx, ly])):
        raise InvalidParameterError("eigenvalues must be finite and strictly positive")
    p = lx.size
    sigma_x = np.diag(lx)
    sigma_y = np.diag(ly)
    if rotation_angle is None:
        return CovariancePair(SpdMatrix(sigma_x), SpdMatrix(sigma_y), commuting=True)

    if rotation_plane is None:
        if seed is None or p < 2:
            raise InvalidParameterError("rotation_angle requires rotation_plane (or a seed with p >= 2)")
        i, j = sorted(np.random.default_rng(seed).choice(p, size=2, replace=False).tolist())
        planes = [(i, j)]
    elif len(rotation_plane) == 2 and np.isscalar(rotation_plane[0]):
        planes = [tuple(rotation_plane)]
    else:
        planes = [tuple(pl) for pl in rotation_plane]
    r = np.eye(p)
    for plane in planes:
        r = givens_rotation(p, plane, rotation_angle) @ r
    sigma_y = r @ sigma_y @ r.T
    sigma_y = 0.5 * (sigma_y + sigma_y.T)
    commuting = _commutes(sigma_x, sigma_y)
    return CovariancePair(SpdMatrix(sigma_x), SpdMatrix(sigma_y), commuting=commuting)


def make_toeplitz_ar1(p: int, rho: float) -> SpdMatrix:
    if int(p) != p or p < 1:
        raise InvalidDimensionError(f"p must be a positive integer, got {p!r}")
    if not abs(rho) < 1:
        raise InvalidParameterError(f"|rho| must be < 1, got {rho}")
    idx = np.arange(int(p))
    return SpdMatrix(float(rho) ** np.abs(idx[:, None] - idx[None, :]))


def commutator_theta(pair: CovariancePair) -> float:
    """``[tr(Sx Sx Sy Sy) - tr(Sx Sy Sx Sy)] / p``, the CPC discrepancy.

    Evaluated as ``||Sx Sy - Sy Sx||_F^2 / (2p)``, which is algebraically
    equal and never negative through cancellation.
    """
    sx = pair.sigma_x.entries
    sy = pair.sigma_y.entries
    comm = sx @ sy - sy @ sx
    return float(np.sum(comm * comm)) / (2.0 * pair.dim)


def pair_words(labels: Sequence[str]) -> list[tuple]:
    return [(a, b) for i, a in enumerate(labels) for b in labels[i:]]


def assumption_ratios(matrices: Mapping[str, object], words: Iterable | None = None) -> RatioDiagnostics:
    """Evaluate ``tr(prod_{l in word} S_l) / p`` for each word.

    ``words`` entries are label sequences of length 2..16 (a plain string is
    read one character per label, or comma separated). With ``words=None``
    every pair word is evaluated, plus, when the labels are ``a, b, c, d``,
    all words appearing in the exact variance of ``tr(Ta Tb Tc Td)``.
    Values are cached by canonical cyclic rotation.
    """
    mats = {str(k): np.asarray(v, dtype=float) for k, v in matrices.items()}
    if not mats:
        raise InvalidDimensionError("no matrices given")
    p = next(iter(mats.values())).shape[0]
    for k, m in mats.items():
        if m.shape != (p, p):
            raise DimensionMismatchError(f"matrix {k!r} has shape {m.shape}, expected {(p, p)}")
    if words is None:
        labels = sorted(mats)
        words = pair_words(labels)
        if set("abcd") <= set(labels):
            from .trace_moments import variance_trace_words

            words = words + [w for w in variance_trace_words() if len(w) > 2]
    out: dict = {}
    cache: dict = {}
    for word in words:
        w = _as_word(word)
        if not 2 <= len(w) <= 16:
            raise InvalidParameterError(f"word length must be in 2..16, got {len(w)}")
        for label in w:
            if label not in mats:
                raise KeyError(f"unknown matrix label {label!r}")
        key = canonical_rotation(w)
        if key not in cache:
            cache[key] = trace_product([mats[label] for label in key]) / p
        out[w] = cache[key]
    return RatioDiagnostics(out, p)


def sqrt_factor(sigma) -> np.ndarray:
    """Lower-triangular ``L`` with ``L @ L.T == sigma``."""
    a = as_square(sigma, "sigma")
    try:
        return np.linalg.cholesky(0.5 * (a + a.T))
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("sigma is not positive definite") from exc

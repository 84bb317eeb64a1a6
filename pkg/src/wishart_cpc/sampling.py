"""Gaussian sampling, scatter matrices, and first-moment Wishart identities.

Wishart matrices are always realized as explicit sums of outer products so the
underlying draws stay available for prefix scatters and the martingale
decomposition.

Seeding: every block of draws uses ``numpy.random.SeedSequence([seed, stream])``
feeding a PCG64 generator, so ``(seed, stream)`` pins the draws bit for bit on
any platform and independent streams can be generated in any order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._linalg import as_square, common_dim
from .covmodel import sqrt_factor
from .exceptions import InsufficientDataError, InvalidParameterError


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), int(stream)]))


@dataclass(frozen=True, eq=False)
class SampleMatrix:
    """``n x p`` array of observations, one per row."""

    rows: np.ndarray
    sigma_label: str = ""

    def __post_init__(self):
        r = np.asarray(self.rows, dtype=float)
        if r.ndim == 1:
            r = r.reshape(1, -1)
        if r.ndim != 2 or r.shape[0] < 1 or r.shape[1] < 1:
            raise InsufficientDataError(f"need at least one row and column, got shape {r.shape}")
        if not np.all(np.isfinite(r)):
            raise ValueError("sample has non-finite entries")
        r.setflags(write=False)
        object.__setattr__(self, "rows", r)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def p(self) -> int:
        return self.rows.shape[1]

    def __array__(self, dtype=None, copy=None):
        return self.rows if dtype is None else self.rows.astype(dtype)

    def take(self, index) -> "SampleMatrix":
        return SampleMatrix(self.rows[index], self.sigma_label)


@dataclass(frozen=True, eq=False)
class ScatterMatrix:
    """Sum of outer products, tagged with its Wishart degrees of freedom."""

    entries: np.ndarray
    df: int
    centered: bool = False

    def __post_init__(self):
        a = as_square(self.entries, "scatter")
        a = 0.5 * (a + a.T)
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)
        if self.df < 0:
            raise InvalidParameterError("df must be non-negative")

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


def _rows(samples) -> np.ndarray:
    if isinstance(samples, SampleMatrix):
        return samples.rows
    return SampleMatrix(samples).rows


def sample_gaussian(n: int, sigma, seed: int, stream: int = 0, label: str = "") -> SampleMatrix:
    """``n`` draws from ``N_p(0, sigma)`` as ``g @ L.T`` with ``L L' = sigma``."""
    if n < 1:
        raise InsufficientDataError(f"n must be >= 1, got {n}")
    L = sqrt_factor(sigma)
    g = make_rng(seed, stream).standard_normal((int(n), L.shape[0]))
    return SampleMatrix(g @ L.T, label)


def scatter(samples) -> ScatterMatrix:
    x = _rows(samples)
    return ScatterMatrix(x.T @ x, df=x.shape[0], centered=False)


def centered_scatter(samples) -> ScatterMatrix:
    x = _rows(samples)
    if x.shape[0] < 2:
        raise InsufficientDataError("centered scatter needs at least 2 rows")
    xc = x - x.mean(axis=0)
    return ScatterMatrix(xc.T @ xc, df=x.shape[0] - 1, centered=True)


def prefix_scatter(samples, h: int) -> ScatterMatrix:
    """Scatter of the first ``h`` rows."""
    x = _rows(samples)
    if not 1 <= h <= x.shape[0]:
        raise IndexError(f"h={h} out of range 1..{x.shape[0]}")
    head = x[:h]
    return ScatterMatrix(head.T @ head, df=h, centered=False)


def wishart_quadratic_mean(a: int, sigma, A) -> np.ndarray:
    """``E[T A T]`` for ``T ~ W_p(a, sigma)``."""
    if a < 1:
        raise InvalidParameterError("a must be >= 1")
    s = as_square(sigma, "sigma")
    m = as_square(A, "A")
    common_dim(s, m)
    return a * a * (s @ m @ s) + a * (s @ m.T @ s) + a * np.trace(s @ m) * s


def wishart_trace_weighted_mean(a: int, sigma, A) -> np.ndarray:
    """``E[tr(T A) T]`` for ``T ~ W_p(a, sigma)``."""
    if a < 1:
        raise InvalidParameterError("a must be >= 1")
    s = as_square(sigma, "sigma")
    m = as_square(A, "A")
    common_dim(s, m)
    return a * (s @ m @ s) + a * (s @ m.T @ s) + a * a * np.trace(s @ m) * s

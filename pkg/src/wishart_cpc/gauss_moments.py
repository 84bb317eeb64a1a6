"""Closed-form moments of Gaussian quadratic forms.

All expectations are over ``x ~ N_p(0, I_p)`` unless a covariance is given.
Trace powers are taken from explicit matrix products, never from an
eigendecomposition.
"""
from __future__ import annotations

import math
from functools import lru_cache
from typing import Sequence

import numpy as np

from ._linalg import as_square, common_dim
from .covmodel import sqrt_factor
from .exceptions import PreconditionError, UnsupportedArityError

SYMMETRY_ATOL = 1e-10

# Term tables for E[prod_i x'M_i x]. Factors are separated by "|"; each factor
# is the trace of the listed product and a trailing "'" transposes that matrix.
_PAIR_TERMS = ("Q|R", "QR", "QR'")

_TRIPLE_TERMS = (
    "Q|R|S",
    "Q|RS", "Q|RS'", "R|QS", "R|QS'", "S|QR", "S|QR'",
    "QRS", "QRS'", "QR'S", "QR'S'", "QSR", "QSR'", "QS'R", "QS'R'",
)

_QUADRUPLE_TERMS = (
    "Q|R|S|T",
    "Q|R|ST", "Q|R|ST'", "Q|S|RT", "Q|S|RT'",
    "Q|T|RS", "Q|T|RS'", "R|S|QT", "R|S|QT'",
    "R|T|QS", "R|T|QS'", "S|T|QR", "S|T|QR'",
    "QR|ST", "QR'|ST", "QR|ST'", "QR'|ST'", "QS|RT", "QS'|RT",
    "QS|RT'", "QS'|RT'", "QT|RS", "QT'|RS", "QT|RS'", "QT'|RS'",
    "Q|RST", "Q|RS'T", "Q|RST'", "Q|RS'T'", "Q|RTS", "Q|RT'S",
    "Q|RTS'", "Q|RT'S'", "R|QST", "R|QS'T", "R|QST'", "R|QS'T'",
    "R|QTS", "R|QT'S", "R|QTS'", "R|QT'S'", "S|QRT", "S|QR'T",
    "S|QRT'", "S|QR'T'", "S|QTR", "S|QT'R", "S|QTR'", "S|QT'R'",
    "T|QRS", "T|QR'S", "T|QRS'", "T|QR'S'", "T|QSR", "T|QS'R",
    "T|QSR'", "T|QS'R'",
    "QRST", "QR'ST", "QRS'T", "QRST'", "QR'S'T", "QR'ST'", "QRS'T'", "QR'S'T'",
    "QRTS", "QR'TS", "QRT'S", "QRTS'", "QR'T'S", "QR'TS'", "QRT'S'", "QR'T'S'",
    "QSRT", "QS'RT", "QSR'T", "QSRT'", "QS'R'T", "QS'RT'", "QSR'T'", "QS'R'T'",
    "QSTR", "QS'TR", "QST'R", "QSTR'", "QS'T'R", "QS'TR'", "QST'R'", "QS'T'R'",
    "QTRS", "QT'RS", "QTR'S", "QTRS'", "QT'R'S", "QT'RS'", "QTR'S'", "QT'R'S'",
    "QTSR", "QT'SR", "QTS'R", "QTSR'", "QT'S'R", "QT'SR'", "QTS'R'", "QT'S'R'",
)

_TERMS = {2: _PAIR_TERMS, 3: _TRIPLE_TERMS, 4: _QUADRUPLE_TERMS}


@lru_cache(maxsize=None)
def _parse_term(term: str) -> tuple:
    factors = []
    for factor in term.split("|"):
        ops = []
        for ch in factor:
            if ch == "'":
                name, _ = ops[-1]
                ops[-1] = (name, True)
            else:
                ops.append(("QRST".index(ch), False))
        factors.append(tuple(ops))
    return tuple(factors)


def _check_symmetric(a: np.ndarray) -> None:
    if not np.allclose(a, a.T, rtol=0.0, atol=SYMMETRY_ATOL * max(1.0, np.abs(a).max())):
        raise PreconditionError("matrix must be symmetric; symmetrize explicitly with (A + A.T) / 2")


def quad_moment(A, order: int) -> float:
    """Raw moment ``E[(x'Ax)^k]`` for symmetric ``A`` and ``k`` in 1..4."""
    a = as_square(A, "A")
    _check_symmetric(a)
    if order not in (1, 2, 3, 4):
        raise PreconditionError(f"order must be 1..4, got {order}")
    a2 = a @ a
    t1 = np.trace(a)
    t2 = np.trace(a2)
    if order == 1:
        return float(t1)
    if order == 2:
        return float(2 * t2 + t1**2)
    t3 = np.einsum("ij,ji->", a2, a)
    if order == 3:
        return float(8 * t3 + 6 * t2 * t1 + t1**3)
    t4 = np.einsum("ij,ji->", a2, a2)
    return float(48 * t4 + 32 * t3 * t1 + 12 * t2**2 + 12 * t2 * t1**2 + t1**4)


def central_moment(A, order: int) -> float:
    """Central moment ``E[(x'Ax - tr A)^k]`` for any square ``A``, ``k`` in {2, 4}."""
    a = as_square(A, "A")
    if order == 2:
        return float(np.einsum("ij,ji->", a, a) + np.sum(a * a))
    if order == 4:
        s = a + a.T
        s2 = s @ s
        return float(3 * np.einsum("ij,ji->", s2, s2) + 0.75 * np.trace(s2) ** 2)
    raise PreconditionError(f"order must be 2 or 4, got {order}")


def mixed_quad_expectation(mats: Sequence) -> float:
    """``E[prod_i x'M_i x]`` for two to four square matrices of equal size."""
    if not 2 <= len(mats) <= 4:
        raise UnsupportedArityError(f"need 2 to 4 matrices, got {len(mats)}")
    ms = [as_square(m, f"M{i}") for i, m in enumerate(mats)]
    common_dim(*ms)
    forms = [(m, m.T) for m in ms]
    cache: dict = {}

    def trace_of(ops) -> float:
        if ops not in cache:
            acc = None
            for idx, transposed in ops:
                m = forms[idx][1 if transposed else 0]
                acc = m if acc is None else acc @ m
            cache[ops] = float(np.trace(acc))
        return cache[ops]

    total = 0.0
    for term in _TERMS[len(ms)]:
        total += math.prod(trace_of(f) for f in _parse_term(term))
    return total


def sandwich_expectation(sigma, A) -> np.ndarray:
    """``E[(z'Az) z z']`` for ``z ~ N_p(0, sigma)``."""
    s = as_square(sigma, "sigma")
    a = as_square(A, "A")
    common_dim(s, a)
    return s @ a @ s + s @ a.T @ s + np.trace(s @ a) * s


def mc_quad_oracle(mats: Sequence, sigma, reps: int, seed: int,
                   chunk: int = 100_000) -> tuple[float, float]:
    """Monte Carlo mean and standard error of ``prod_i z'M_i z``, ``z ~ N_p(0, sigma)``."""
    if reps < 1000:
        raise PreconditionError("reps must be >= 1000")
    ms = [as_square(m, f"M{i}") for i, m in enumerate(mats)]
    s = as_square(sigma, "sigma")
    p = common_dim(s, *ms)
    L = sqrt_factor(s)
    rng = np.random.default_rng(seed)
    values = np.empty(reps)
    for start in range(0, reps, chunk):
        stop = min(reps, start + chunk)
        z = rng.standard_normal((stop - start, p)) @ L.T
        prod = np.ones(stop - start)
        for m in ms:
            prod *= np.einsum("ni,ij,nj->n", z, m, z)
        values[start:stop] = prod
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(reps))

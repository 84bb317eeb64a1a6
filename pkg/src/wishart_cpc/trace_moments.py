"""Moments of ``tr(Ta Tb Tc Td)`` for four independent Wishart matrices.

``M = tr(Ta Tb Tc Td) / r_p`` with ``r_p = p^2 sqrt(na nb nc nd)``. This module
gives its exact mean and finite-sample variance, the finite-p variance
limits, and the martingale difference decomposition along the filtration
that reveals the draws of a, b, c, d one at a time.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._linalg import as_square, canonical_rotation, trace_product
from .exceptions import DimensionMismatchError, InvalidParameterError
from .sampling import SampleMatrix, ScatterMatrix

LABELS = ("a", "b", "c", "d")


@dataclass(frozen=True, eq=False)
class WishartQuartetSpec:
    """Degrees of freedom and covariance parameters of ``Ta, Tb, Tc, Td``."""

    ns: tuple
    sigmas: tuple

    def __post_init__(self):
        ns = tuple(int(n) for n in self.ns)
        if len(ns) != 4 or any(n < 1 for n in ns):
            raise InvalidParameterError(f"need four positive degrees of freedom, got {self.ns}")
        if len(self.sigmas) != 4:
            raise InvalidParameterError("need four covariance matrices")
        sigmas = tuple(as_square(s, f"sigma_{l}") for s, l in zip(self.sigmas, LABELS))
        if len({s.shape for s in sigmas}) != 1:
            raise DimensionMismatchError("covariance matrices must share dimension")
        object.__setattr__(self, "ns", ns)
        object.__setattr__(self, "sigmas", sigmas)

    @property
    def p(self) -> int:
        return self.sigmas[0].shape[0]

    @property
    def r_p(self) -> float:
        return self.p**2 * math.sqrt(math.prod(self.ns))

    @property
    def labeled(self) -> dict:
        return dict(zip(LABELS, self.sigmas))


@dataclass(frozen=True, eq=False)
class MartingaleTrace:
    """Martingale differences ``D_h`` and conditional variances ``sigma_h^2``."""

    increments: np.ndarray
    conditional_variances: np.ndarray
    boundaries: tuple

    def blocks(self) -> list[str]:
        out = []
        start = 0
        for label, stop in zip(LABELS, self.boundaries):
            out.extend([label] * (stop - start))
            start = stop
        return out

    def to_csv(self, fh=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["h", "block", "D_h", "sigma_h2"])
        for h, (blk, d, s) in enumerate(
            zip(self.blocks(), self.increments, self.conditional_variances), start=1
        ):
            w.writerow([h, blk, f"{d:.17g}", f"{s:.17g}"])
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text


# Exact variance of tr(Ta Tb Tc Td), as (coefficient, trace words) pairs; the
# full value is na nb nc nd times the sum of coefficient * prod tr(word).
def _variance_terms(na, nb, nc, nd):
    return [
        (na*nb + na*nc + na*nd + nb*nc + nb*nd + nc*nd + 1, ("abcd", "abcd")),
        (na*nb*nc + na*nb*nd + na*nc*nd + nb*nc*nd + na + nb + nc + nd, ("abcdabcd",)),
        ((na + 1) * (nb + 1) * (nc + 1), ("abcdcbad",)),
        ((na + 1) * (nb + 1) * (nd + 1), ("abcbadcd",)),
        ((na + 1) * (nc + 1) * (nd + 1), ("abadcbcd",)),
        ((nb + 1) * (nc + 1) * (nd + 1), ("abcdadcb",)),
        ((na + 1) * (nb + 1), ("cd", "abcbad")),
        ((na + 1) * (nc + 1), ("abad", "bcdc")),
        ((na + 1) * (nd + 1), ("bc", "abadcd")),
        ((nb + 1) * (nc + 1), ("ad", "abcdcb")),
        ((nb + 1) * (nd + 1), ("abcb", "adcd")),
        ((nc + 1) * (nd + 1), ("ab", "adcbcd")),
        (na + 1, ("bc", "cd", "abad")),
        (nb + 1, ("ad", "cd", "abcb")),
        (nc + 1, ("ab", "ad", "bcdc")),
        (nd + 1, ("ab", "bc", "adcd")),
        (1, ("ab", "ad", "bc", "cd")),
    ]


def variance_trace_words() -> list[tuple]:
    """Distinct trace words (as label tuples) used by the exact variance."""
    seen = []
    for _, words in _variance_terms(1, 1, 1, 1):
        for w in words:
            if tuple(w) not in seen:
                seen.append(tuple(w))
    return seen


class _WordCache:
    def __init__(self, mats: dict):
        self.mats = mats
        self.values: dict = {}

    def __call__(self, word) -> float:
        key = canonical_rotation(word)
        if key not in self.values:
            self.values[key] = trace_product([self.mats[l] for l in key])
        return self.values[key]


def _scatter_array(s, name) -> np.ndarray:
    return as_square(s.entries if isinstance(s, ScatterMatrix) else s, name)


def statistic_m(scatters: Sequence, spec: WishartQuartetSpec) -> float:
    """``tr(Ta Tb Tc Td) / r_p``."""
    if len(scatters) != 4:
        raise InvalidParameterError("need four scatter matrices")
    mats = [_scatter_array(s, f"T_{l}") for s, l in zip(scatters, LABELS)]
    if any(m.shape != (spec.p, spec.p) for m in mats):
        raise DimensionMismatchError("scatter dimensions do not match the covariance dimension")
    for s, n in zip(scatters, spec.ns):
        if isinstance(s, ScatterMatrix) and s.df != n:
            raise InvalidParameterError(f"scatter df {s.df} does not match spec n={n}")
    return trace_product(mats) / spec.r_p


def expected_m(spec: WishartQuartetSpec) -> float:
    return math.prod(spec.ns) / spec.r_p * trace_product(spec.sigmas)


def exact_variance_trace_product(spec: WishartQuartetSpec) -> float:
    """Exact finite-sample ``Var[tr(Ta Tb Tc Td)]``."""
    tr = _WordCache(spec.labeled)
    total = 0.0
    for coef, words in _variance_terms(*spec.ns):
        total += coef * math.prod(tr(w) for w in words)
    return math.prod(spec.ns) * total


def exact_variance_m(spec: WishartQuartetSpec) -> float:
    return exact_variance_trace_product(spec) / spec.r_p**2


def _pair_ratio(s1, s2, p) -> float:
    return float(np.einsum("ij,ji->", s1, s2)) / p


def asymptotic_variance_quartet(sigmas: Sequence) -> float:
    """Finite-p value of ``sigma_ab sigma_ad sigma_bc sigma_cd``."""
    sa, sb, sc, sd = (as_square(s) for s in sigmas)
    p = sa.shape[0]
    if any(s.shape != sa.shape for s in (sb, sc, sd)):
        raise DimensionMismatchError("covariance matrices must share dimension")
    return (_pair_ratio(sa, sb, p) * _pair_ratio(sa, sd, p)
            * _pair_ratio(sb, sc, p) * _pair_ratio(sc, sd, p))


def asymptotic_variance_cpc(sigma_x, sigma_y) -> float:
    """Finite-p value of ``sigma_xx sigma_yy sigma_xy^2 + sigma_xy^4``."""
    sx, sy = as_square(sigma_x), as_square(sigma_y)
    if sx.shape != sy.shape:
        raise DimensionMismatchError("sigma_x and sigma_y must share dimension")
    p = sx.shape[0]
    sxx, syy, sxy = _pair_ratio(sx, sx, p), _pair_ratio(sy, sy, p), _pair_ratio(sx, sy, p)
    return sxx * syy * sxy**2 + sxy**4


def exact_variance_cpc(sigma_x, sigma_y, m: int, n: int) -> float:
    """Exact ``Var[(m-1)(n-1) theta_hat / p]`` for split subsamples of sizes m, n.

    The two trace words of ``theta_hat`` are independent quartets with
    degrees of freedom ``(m-1, m-1, n-1, n-1)`` and ``(m-1, n-1, m-1, n-1)``.
    """
    sx, sy = as_square(sigma_x), as_square(sigma_y)
    q1 = WishartQuartetSpec((m - 1, m - 1, n - 1, n - 1), (sx, sx, sy, sy))
    q2 = WishartQuartetSpec((m - 1, n - 1, m - 1, n - 1), (sx, sy, sx, sy))
    return exact_variance_m(q1) + exact_variance_m(q2)


def _check_samples(samples: Sequence, spec: WishartQuartetSpec) -> list[np.ndarray]:
    if len(samples) != 4:
        raise InvalidParameterError("need four sample blocks")
    rows = [s.rows if isinstance(s, SampleMatrix) else SampleMatrix(s).rows for s in samples]
    for r, n, l in zip(rows, spec.ns, LABELS):
        if r.shape != (n, spec.p):
            raise DimensionMismatchError(f"block {l} has shape {r.shape}, spec expects {(n, spec.p)}")
    return rows


def martingale_decompose(samples: Sequence, spec: WishartQuartetSpec) -> MartingaleTrace:
    """Martingale differences ``D_h = E_h[M] - E_{h-1}[M]`` and their conditional variances.

    Block a uses only the population matrices; block b uses the completed
    ``Ta``; block c uses ``Ta Tb``; block d uses ``Ta Tb Tc``.
    """
    x, y, z, w = _check_samples(samples, spec)
    na, nb, nc, nd = spec.ns
    sa, sb, sc, sd = spec.sigmas
    r = spec.r_p
    ta, tb, tc = x.T @ x, y.T @ y, z.T @ z

    def block(draws, cov, kernel, scale):
        # scale * (v' K v - tr(cov K)) for each row v
        quad = np.einsum("ni,ij,nj->n", draws, kernel, draws)
        return scale * (quad - float(np.einsum("ij,ji->", cov, kernel)))

    k_a = sb @ sc @ sd
    k_b = sc @ sd @ ta
    k_c = sd @ ta @ tb
    k_d = ta @ tb @ tc
    d = np.concatenate([
        block(x, sa, k_a, nb * nc * nd / r),
        block(y, sb, k_b, nc * nd / r),
        block(z, sc, k_c, nd / r),
        block(w, sd, k_d, 1.0 / r),
    ])
    s2 = _block_variances(spec, ta, tb, tc)
    var = np.concatenate([np.full(n, v) for n, v in zip(spec.ns, s2)])
    bounds = tuple(np.cumsum(spec.ns).tolist())
    return MartingaleTrace(d, var, bounds)


def _block_variances(spec, ta, tb, tc) -> tuple:
    na, nb, nc, nd = spec.ns
    sa, sb, sc, sd = spec.sigmas
    r2 = spec.r_p**2
    tp = trace_product
    v_a = (nb * nc * nd) ** 2 / r2 * (
        tp([sa, sb, sc, sd, sa, sb, sc, sd]) + tp([sa, sb, sc, sd, sa, sd, sc, sb]))
    v_b = (nc * nd) ** 2 / r2 * (
        tp([ta, sb, sc, sd, ta, sb, sc, sd]) + tp([ta, sb, ta, sd, sc, sb, sc, sd]))
    tab = ta @ tb
    v_c = nd**2 / r2 * (
        tp([tab, sc, sd, tab, sc, sd]) + tp([tab, sc, tb @ ta, sd, sc, sd]))
    tabc = tab @ tc
    tcba = tabc.T
    v_d = (tp([tabc, sd, tabc, sd]) + tp([tabc, sd, tcba, sd])) / r2
    return v_a, v_b, v_c, v_d


def conditional_variances(samples: Sequence, spec: WishartQuartetSpec) -> np.ndarray:
    """``sigma_h^2 = E_{h-1}[D_h^2]`` for every step ``h``."""
    return martingale_decompose(samples, spec).conditional_variances

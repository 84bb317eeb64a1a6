"""Split-sample test of the common principal components hypothesis.

Each sample is randomly split into four equal blocks. ``theta_hat`` from the
eight block scatters, standardized by plug-in variance estimates from the two
full scatters, gives a one-sided statistic ``T`` that is compared with the
upper normal quantile.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import ndtr, ndtri
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .estimators import SIGMA_MODES, EstimateSet, SplitScatters, estimate_all
from .exceptions import (
    DegenerateVarianceError,
    DimensionMismatchError,
    InsufficientDataError,
    InvalidParameterError,
)
from .sampling import SampleMatrix, centered_scatter, make_rng


class FourWaySplit(NamedTuple):
    blocks: tuple
    n_discarded: int


@dataclass(frozen=True)
class TestReport:
    statistic_t: float
    p_value: float
    reject: bool
    alpha: float
    estimates: EstimateSet
    M: int
    N: int
    m: int
    n: int
    p: int
    seed: int
    discarded_x: int = 0
    discarded_y: int = 0

    __test__ = False  # not a pytest class

    def to_dict(self) -> dict:
        d = asdict(self)
        d["estimates"] = self.estimates.to_dict()
        return d

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, payload: dict) -> "TestReport":
        d = dict(payload)
        d["estimates"] = EstimateSet.from_dict(d["estimates"])
        return cls(**d)


def split_four(data, seed: int, stream: int = 0) -> FourWaySplit:
    """Seeded random partition of the rows into four blocks of ``n // 4``.

    The ``n % 4`` rows left over after the permutation are dropped.
    """
    sample = data if isinstance(data, SampleMatrix) else SampleMatrix(data)
    if sample.n < 8:
        raise InsufficientDataError(f"need at least 8 rows to split four ways, got {sample.n}")
    perm = make_rng(seed, stream).permutation(sample.n)
    m = sample.n // 4
    blocks = tuple(sample.take(perm[k * m:(k + 1) * m]) for k in range(4))
    return FourWaySplit(blocks, sample.n - 4 * m)


def normal_quantile(prob: float) -> float:
    if not 0.0 < prob < 1.0:
        raise InvalidParameterError(f"probability must lie in (0, 1), got {prob}")
    return float(ndtri(prob))


def normal_cdf(x: float) -> float:
    return float(ndtr(x))


def run_cpc_test(x_data, y_data, alpha: float = 0.05, seed: int = 0,
                 sigma_mode: str = "normalized") -> TestReport:
    """Split both samples, estimate, and decide at level ``alpha``.

    ``sigma_mode="literal"`` feeds the raw scatters into the plug-in variance
    estimators instead of the sample covariances; the resulting statistic is
    scaled by a power of the sample sizes and is only useful to reproduce the
    raw formulas.
    """
    if not 0.0 < alpha < 1.0:
        raise InvalidParameterError(f"alpha must lie in (0, 1), got {alpha}")
    if sigma_mode not in SIGMA_MODES:
        raise InvalidParameterError(f"sigma_mode must be one of {SIGMA_MODES}")
    x = x_data if isinstance(x_data, SampleMatrix) else SampleMatrix(x_data)
    y = y_data if isinstance(y_data, SampleMatrix) else SampleMatrix(y_data)
    if x.p != y.p:
        raise DimensionMismatchError(f"x has {x.p} columns, y has {y.p}")
    xs = split_four(x, seed, stream=0)
    ys = split_four(y, seed, stream=1)
    m, n = xs.blocks[0].n, ys.blocks[0].n
    big_m, big_n = 4 * m, 4 * n
    splits = SplitScatters(
        tuple(centered_scatter(b) for b in xs.blocks),
        tuple(centered_scatter(b) for b in ys.blocks),
        m, n,
    )
    # full scatters over the retained 4m / 4n rows
    full_x = centered_scatter(np.vstack([b.rows for b in xs.blocks]))
    full_y = centered_scatter(np.vstack([b.rows for b in ys.blocks]))
    est = estimate_all(splits, full_x, full_y, big_m, big_n, sigma_mode)
    if not est.variance_hat > 0.0 or not math.isfinite(est.variance_hat):
        raise DegenerateVarianceError(f"plug-in variance is {est.variance_hat!r}; data are degenerate")
    p = x.p
    t = (m - 1) * (n - 1) / p * est.theta_hat / math.sqrt(est.variance_hat)
    return TestReport(
        statistic_t=t,
        p_value=1.0 - normal_cdf(t),
        reject=bool(t > normal_quantile(1.0 - alpha)),
        alpha=alpha,
        estimates=est,
        M=big_m, N=big_n, m=m, n=n, p=p,
        seed=int(seed),
        discarded_x=xs.n_discarded,
        discarded_y=ys.n_discarded,
    )


class CPCTest(BaseEstimator):
    """Estimator-style wrapper around :func:`run_cpc_test`.

    ``fit(X, Y)`` runs the test on two samples with the same columns and
    stores the outcome in ``report_``, ``statistic_``, ``p_value_`` and
    ``reject_``.

    Examples
    --------
    >>> import numpy as np
    >>> rng = np.random.default_rng(0)
    >>> X, Y = rng.standard_normal((80, 20)), rng.standard_normal((80, 20))
    >>> test = CPCTest(alpha=0.05, random_state=1).fit(X, Y)
    >>> 0.0 <= test.p_value_ <= 1.0
    True
    """

    def __init__(self, alpha=0.05, random_state=0, sigma_mode="normalized"):
        self.alpha = alpha
        self.random_state = random_state
        self.sigma_mode = sigma_mode

    def fit(self, X, Y):
        X = check_array(X, ensure_min_samples=8)
        Y = check_array(Y, ensure_min_samples=8)
        self.report_ = run_cpc_test(X, Y, self.alpha, self.random_state, self.sigma_mode)
        self.statistic_ = self.report_.statistic_t
        self.p_value_ = self.report_.p_value
        self.reject_ = self.report_.reject
        self.n_features_in_ = X.shape[1]
        return self

    def decision(self) -> bool:
        check_is_fitted(self, "report_")
        return self.reject_

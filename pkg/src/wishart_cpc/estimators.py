"""Estimators of the CPC discrepancy and of the plug-in variance ingredients."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._linalg import as_square, trace_product
from .exceptions import DimensionMismatchError, InsufficientDataError, InvalidParameterError
from .sampling import ScatterMatrix

SIGMA_MODES = ("normalized", "literal")


@dataclass(frozen=True, eq=False)
class SplitScatters:
    """Centered scatters of the four x-subsamples (size m) and four y-subsamples (size n)."""

    x_blocks: tuple
    y_blocks: tuple
    m: int
    n: int

    def __post_init__(self):
        if len(self.x_blocks) != 4 or len(self.y_blocks) != 4:
            raise InvalidParameterError("need exactly four x blocks and four y blocks")
        if self.m < 2 or self.n < 2:
            raise InsufficientDataError("subsample sizes m and n must be >= 2")
        mats = [np.asarray(b, dtype=float) for b in (*self.x_blocks, *self.y_blocks)]
        if len({a.shape for a in mats}) != 1:
            raise DimensionMismatchError("all eight scatters must share dimension")
        for b in self.x_blocks:
            if isinstance(b, ScatterMatrix) and b.df != self.m - 1:
                raise InvalidParameterError(f"x block df {b.df} != m - 1 = {self.m - 1}")
        for b in self.y_blocks:
            if isinstance(b, ScatterMatrix) and b.df != self.n - 1:
                raise InvalidParameterError(f"y block df {b.df} != n - 1 = {self.n - 1}")

    @property
    def p(self) -> int:
        return np.asarray(self.x_blocks[0]).shape[0]


@dataclass(frozen=True)
class EstimateSet:
    theta_hat: float
    sigma_hat_xx: float
    sigma_hat_yy: float
    sigma_hat_xy: float
    sigma_mode: str = "normalized"
    variance_hat: float = field(init=False)

    def __post_init__(self):
        v = self.sigma_hat_xx * self.sigma_hat_yy * self.sigma_hat_xy**2 + self.sigma_hat_xy**4
        object.__setattr__(self, "variance_hat", v)

    def to_dict(self) -> dict:
        return {
            "theta_hat": self.theta_hat,
            "sigma_hat_xx": self.sigma_hat_xx,
            "sigma_hat_yy": self.sigma_hat_yy,
            "sigma_hat_xy": self.sigma_hat_xy,
            "variance_hat": self.variance_hat,
            "sigma_mode": self.sigma_mode,
        }

    @classmethod
    def from_dict(cls, payload) -> "EstimateSet":
        return cls(payload["theta_hat"], payload["sigma_hat_xx"], payload["sigma_hat_yy"],
                   payload["sigma_hat_xy"], payload.get("sigma_mode", "normalized"))


def _mats(blocks: Sequence) -> list[np.ndarray]:
    return [np.asarray(b, dtype=float) for b in blocks]


def _check_mode(mode: str) -> None:
    if mode not in SIGMA_MODES:
        raise InvalidParameterError(f"mode must be one of {SIGMA_MODES}, got {mode!r}")


def theta_hat(splits: SplitScatters) -> float:
    """Unbiased split-sample estimator of ``theta_p``.

    ``[tr(Tx1 Tx2 Ty1 Ty2) - tr(Tx3 Ty3 Tx4 Ty4)] / ((m-1)^2 (n-1)^2 p)``.
    The first word pairs like matrices (xxyy), the second alternates (xyxy).
    """
    x1, x2, x3, x4 = _mats(splits.x_blocks)
    y1, y2, y3, y4 = _mats(splits.y_blocks)
    num = trace_product([x1, x2, y1, y2]) - trace_product([x3, y3, x4, y4])
    return num / ((splits.m - 1) ** 2 * (splits.n - 1) ** 2 * splits.p)


def sigma_hat_quadratic(scatter, sample_count: int, p: int, mode: str = "normalized") -> float:
    """Bai-Saranadasa estimator of ``tr(Sigma^2) / p``.

    ``(M-1)^2 / (p (M-2)(M+1)) * [tr(A^2) - tr(A)^2 / (M-1)]`` where ``A`` is
    the sample covariance ``T / (M-1)`` (``mode="normalized"``) or the
    centered scatter ``T`` itself (``mode="literal"``). Only the normalized
    form estimates ``tr(Sigma^2) / p`` consistently; the literal form is
    ``(M-1)^2`` times larger.
    """
    _check_mode(mode)
    if sample_count < 3:
        raise InsufficientDataError("sample_count must be >= 3")
    big_m = sample_count
    a = as_square(scatter, "scatter")
    if mode == "normalized":
        a = a / (big_m - 1)
    t2 = float(np.sum(a * a))
    t1 = float(np.trace(a))
    return (big_m - 1) ** 2 / (p * (big_m - 2) * (big_m + 1)) * (t2 - t1 * t1 / (big_m - 1))


def sigma_hat_cross(scatter_x, scatter_y, p: int, mode: str = "normalized",
                    df_x: int | None = None, df_y: int | None = None) -> float:
    """Estimator of ``tr(Sigma_x Sigma_y) / p`` from the two full scatters.

    ``mode="literal"`` returns ``tr(Tx Ty) / p``; ``mode="normalized"``
    divides further by ``df_x * df_y`` (``(M-1)(N-1)`` for centered scatters),
    taken from the scatter objects when not given.
    """
    _check_mode(mode)
    tx, ty = as_square(scatter_x, "scatter_x"), as_square(scatter_y, "scatter_y")
    if tx.shape != ty.shape:
        raise DimensionMismatchError("scatters must share dimension")
    value = float(np.einsum("ij,ji->", tx, ty)) / p
    if mode == "literal":
        return value
    df_x = df_x if df_x is not None else getattr(scatter_x, "df", None)
    df_y = df_y if df_y is not None else getattr(scatter_y, "df", None)
    if not df_x or not df_y:
        raise InvalidParameterError("normalized mode needs degrees of freedom for both scatters")
    return value / (df_x * df_y)


def theta_hat_alternative(scatter_x, scatter_y, M: int, N: int, p: int) -> float:
    """Unbiased estimator of ``theta_p`` from the unsplit centered scatters.

    Uses every observation once instead of splitting into four blocks; the
    result is divided by ``p`` so it sits on the same scale as ``theta_hat``.
    """
    if M < 3 or N < 3:
        raise InsufficientDataError("M and N must be >= 3")
    tx, ty = as_square(scatter_x, "scatter_x"), as_square(scatter_y, "scatter_y")
    if tx.shape != ty.shape:
        raise DimensionMismatchError("scatters must share dimension")
    txx = tx @ tx
    tyy = ty @ ty
    txy = tx @ ty
    tr_x = float(np.trace(tx))
    tr_y = float(np.trace(ty))
    tr_xy = float(np.trace(txy))
    tr_xxyy = float(np.einsum("ij,ji->", txx, tyy))
    tr_xxy = float(np.einsum("ij,ji->", txx, ty))
    tr_xyy = float(np.einsum("ij,ji->", tx, tyy))
    tr_xyxy = float(np.einsum("ij,ji->", txy, txy))
    m1, n1 = M - 1, N - 1
    bracket = (
        tr_xxyy
        - tr_xxy * tr_y / n1
        - tr_xyy * tr_x / m1
        + tr_xy * tr_x * tr_y / (m1 * n1)
        - (M * N - M - N + 3) / (m1 * n1) * tr_xyxy
        + (M + N - 1) / (m1 * n1) * tr_xy * tr_xy
    )
    return bracket / ((M - 2) * (M + 1) * (N - 2) * (N + 1) * p)


def estimate_all(splits: SplitScatters, full_x, full_y, M: int, N: int,
                 mode: str = "normalized") -> EstimateSet:
    """Everything the test statistic needs, from split and full centered scatters."""
    p = splits.p
    return EstimateSet(
        theta_hat=theta_hat(splits),
        sigma_hat_xx=sigma_hat_quadratic(full_x, M, p, mode),
        sigma_hat_yy=sigma_hat_quadratic(full_y, N, p, mode),
        sigma_hat_xy=sigma_hat_cross(full_x, full_y, p, mode, df_x=M - 1, df_y=N - 1),
        sigma_mode=mode,
    )

"""Monte Carlo experiments: moment checks, CLT shape, size and power.

Replication ``r`` draws from ``numpy.random.SeedSequence([base_seed, r])``
(SeedSequence hashes its entropy words into a 128-bit pool, so neighbouring
indices give unrelated streams). Replications are therefore independent of
how they are scheduled, and reports are identical for any worker count.
"""
from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy import stats

from ._linalg import trace_product
from .covmodel import make_cpc_pair, make_identity, make_toeplitz_ar1, commutator_theta
from .cpc_test import run_cpc_test
from .estimators import SplitScatters, theta_hat, theta_hat_alternative
from .exceptions import InvalidParameterError
from .trace_moments import (
    WishartQuartetSpec,
    exact_variance_cpc,
    exact_variance_m,
    exact_variance_trace_product,
    expected_m,
    martingale_decompose,
    asymptotic_variance_cpc,
    asymptotic_variance_quartet,
)

KINDS = ("clt_quartet", "clt_cpc", "size_power", "moment_validation")
SEED_RULE = "numpy.random.SeedSequence([base_seed, replication_index]) -> PCG64"


@dataclass
class McConfig:
    """Experiment description.

    ``ns`` holds the four quartet degrees of freedom (clt_quartet,
    moment_validation) or the subsample sizes ``(m, n)`` of the CPC
    experiments; when omitted every size is ``ceil(p ** delta)``. ``sigmas``
    lists four covariance specs for the quartet, ``pair`` one CPC pair spec
    (see :func:`build_sigma` and :func:`build_pair`).
    """

    kind: str
    p: int
    replications: int
    base_seed: int = 0
    delta: float | None = None
    ns: tuple | None = None
    sigmas: list | None = None
    pair: dict | None = None
    alpha: float = 0.05
    sigma_mode: str = "normalized"
    standardize: str = "exact"
    workers: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidParameterError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        if self.replications < 100:
            raise InvalidParameterError("replications must be >= 100")
        if self.p < 1:
            raise InvalidParameterError("p must be >= 1")
        if self.ns is None:
            if self.delta is None or not 0.0 < self.delta < 1.0:
                raise InvalidParameterError("give explicit ns or delta in (0, 1)")
        else:
            self.ns = tuple(int(n) for n in self.ns)
        if self.standardize not in ("exact", "asymptotic"):
            raise InvalidParameterError("standardize must be 'exact' or 'asymptotic'")
        if self.kind in ("clt_cpc", "size_power"):
            m, n = self.sizes()
            if m < 2 or n < 2:
                raise InvalidParameterError("subsample sizes must be >= 2")
        if self.workers < 1:
            raise InvalidParameterError("workers must be >= 1")

    def sizes(self) -> tuple:
        count = 2 if self.kind in ("clt_cpc", "size_power") else 4
        if self.ns is not None:
            if len(self.ns) != count:
                raise InvalidParameterError(f"{self.kind} needs {count} sizes, got {len(self.ns)}")
            return self.ns
        return (math.ceil(self.p ** self.delta),) * count

    @classmethod
    def from_dict(cls, payload: dict) -> "McConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(payload) - known
        if unknown:
            raise InvalidParameterError(f"unknown config fields {sorted(unknown)}")
        return cls(**payload)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ns"] = list(self.ns) if self.ns is not None else None
        return d


@dataclass
class McReport:
    kind: str
    replications: int
    mean: float
    variance: float
    se_mean: float
    se_variance: float
    ks_distance: float | None = None
    skewness: float | None = None
    excess_kurtosis: float | None = None
    rejection_rate: float | None = None
    rejection_se: float | None = None
    z_scores: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    seed_rule: str = SEED_RULE
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def numeric_payload(self) -> dict:
        """Everything except run metadata (timings)."""
        d = self.to_dict()
        d.pop("metadata")
        return d

    @classmethod
    def from_dict(cls, payload: dict) -> "McReport":
        return cls(**payload)


def build_sigma(spec, p: int) -> np.ndarray:
    """Covariance matrix from a JSON-style spec.

    Families: ``identity``; ``scaled`` (``scale``); ``ar1`` (``rho``);
    ``diag`` (``eigvals``, length p); ``random`` (``seed``, an SPD matrix
    ``G G'/p + I/2`` with standard normal ``G``); or explicit ``entries``.
    A bare string names a family with default parameters.
    """
    if spec is None:
        spec = {"family": "identity"}
    elif isinstance(spec, str):
        spec = {"family": spec}
    if "entries" in spec:
        a = np.asarray(spec["entries"], dtype=float)
        if a.shape != (p, p):
            raise InvalidParameterError(f"entries shape {a.shape} does not match p={p}")
        return a
    family = spec.get("family", "identity")
    if family == "identity":
        return make_identity(p).entries
    if family == "scaled":
        return float(spec["scale"]) * make_identity(p).entries
    if family == "ar1":
        return make_toeplitz_ar1(p, float(spec["rho"])).entries
    if family == "diag":
        ev = np.asarray(spec["eigvals"], dtype=float)
        if ev.shape != (p,) or np.any(ev <= 0):
            raise InvalidParameterError("diag eigvals must be p positive numbers")
        return np.diag(ev)
    if family == "random":
        g = np.random.default_rng(int(spec.get("seed", 0))).standard_normal((p, p))
        return g @ g.T / p + 0.5 * np.eye(p)
    raise InvalidParameterError(f"unknown covariance family {family!r}")


def build_pair(spec, p: int):
    """CPC covariance pair from a JSON-style spec.

    ``null`` (default): both identity. ``cpc``: explicit ``eigvals_x``,
    ``eigvals_y``, optional ``rotation_deg`` and ``planes``. ``rotated``: the
    alternative with eigenvalues ``high`` on the first half of coordinates and
    ``low`` on the rest for both matrices, and ``sigma_y`` rotated by
    ``rotation_deg`` (default 45) in planes ``(i, i + p/2)`` for the first
    ``n_planes`` indices (default all).
    """
    spec = spec or {"family": "null"}
    family = spec.get("family", "null")
    if family == "null":
        return make_cpc_pair(np.ones(p), np.ones(p))
    if family == "cpc":
        angle = spec.get("rotation_deg")
        return make_cpc_pair(spec["eigvals_x"], spec["eigvals_y"],
                             None if angle is None else math.radians(angle),
                             spec.get("planes"))
    if family == "rotated":
        half = p // 2
        if half < 1:
            raise InvalidParameterError("rotated family needs p >= 2")
        high, low = float(spec.get("high", 3.0)), float(spec.get("low", 1.0))
        ev = np.r_[np.full(half, high), np.full(p - half, low)]
        k = int(spec.get("n_planes", half))
        planes = [(i, i + half) for i in range(k)]
        return make_cpc_pair(ev, ev, math.radians(spec.get("rotation_deg", 45.0)), planes)
    raise InvalidParameterError(f"unknown pair family {family!r}")


def _rep_rng(base_seed: int, rep: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(base_seed) & (2**64 - 1), int(rep)]))


class _Experiment:
    """Per-process setup for one config: covariance factors and exact constants."""

    def __init__(self, cfg: McConfig):
        self.cfg = cfg
        p = cfg.p
        if cfg.kind in ("clt_quartet", "moment_validation"):
            specs = cfg.sigmas or [None] * 4
            if len(specs) != 4:
                raise InvalidParameterError("quartet experiments need four sigma specs")
            self.sigmas = [build_sigma(s, p) for s in specs]
            self.factors = [np.linalg.cholesky(s) for s in self.sigmas]
            self.spec = WishartQuartetSpec(cfg.sizes(), self.sigmas)
            self.mean_m = expected_m(self.spec)
            self.var_m = exact_variance_m(self.spec)
        else:
            self.pair = build_pair(cfg.pair, p)
            sx, sy = self.pair.sigma_x.entries, self.pair.sigma_y.entries
            self.factors = [np.linalg.cholesky(sx), np.linalg.cholesky(sy)]
            m, n = cfg.sizes()
            self.theta = commutator_theta(self.pair)
            self.var_exact = exact_variance_cpc(sx, sy, m, n)
            self.var_asym = asymptotic_variance_cpc(sx, sy)

    def draw(self, rng, n, factor):
        return rng.standard_normal((n, factor.shape[0])) @ factor.T

    def replicate(self, rep: int) -> tuple:
        cfg = self.cfg
        rng = _rep_rng(cfg.base_seed, rep)
        if cfg.kind == "clt_quartet":
            blocks = [self.draw(rng, n, f) for n, f in zip(self.spec.ns, self.factors)]
            m_val = trace_product([b.T @ b for b in blocks]) / self.spec.r_p
            scale = self.var_m if cfg.standardize == "exact" else asymptotic_variance_quartet(self.sigmas)
            return ((m_val - self.mean_m) / math.sqrt(scale), m_val)
        if cfg.kind == "moment_validation":
            blocks = [self.draw(rng, n, f) for n, f in zip(self.spec.ns, self.factors)]
            tr = trace_product([b.T @ b for b in blocks])
            mt = martingale_decompose(blocks, self.spec)
            m_val = tr / self.spec.r_p
            telescoping = float(math.fsum(mt.increments)) - (m_val - self.mean_m)
            return (tr, float(math.fsum(mt.conditional_variances)), telescoping)
        m, n = cfg.sizes()
        x = self.draw(rng, 4 * m, self.factors[0])
        y = self.draw(rng, 4 * n, self.factors[1])
        if cfg.kind == "size_power":
            split_seed = int(rng.integers(2**63))
            rep_report = run_cpc_test(x, y, cfg.alpha, split_seed, cfg.sigma_mode)
            return (rep_report.statistic_t, float(rep_report.reject))

        def cs(a):
            a = a - a.mean(axis=0)
            return a.T @ a

        splits = SplitScatters(tuple(cs(x[k * m:(k + 1) * m]) for k in range(4)),
                               tuple(cs(y[k * n:(k + 1) * n]) for k in range(4)), m, n)
        th = theta_hat(splits)
        th_alt = theta_hat_alternative(cs(x), cs(y), 4 * m, 4 * n, cfg.p)
        scale = self.var_exact if cfg.standardize == "exact" else self.var_asym
        z = (m - 1) * (n - 1) / cfg.p * (th - self.theta) / math.sqrt(scale)
        return (z, th, th_alt)


_WORKER_STATE: dict = {}


def _run_chunk(cfg: McConfig, start: int, stop: int) -> np.ndarray:
    key = id(cfg)
    exp = _WORKER_STATE.get(key)
    if exp is None or exp.cfg is not cfg:
        exp = _Experiment(cfg)
        _WORKER_STATE.clear()
        _WORKER_STATE[key] = exp
    return np.array([exp.replicate(r) for r in range(start, stop)], dtype=float)


def run_replications(cfg: McConfig, chunk: int = 500) -> np.ndarray:
    """Raw per-replication outputs, shape (replications, k), in index order."""
    bounds = [(s, min(cfg.replications, s + chunk)) for s in range(0, cfg.replications, chunk)]
    if cfg.workers == 1:
        parts = [_run_chunk(cfg, s, e) for s, e in bounds]
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(_run_chunk, [cfg] * len(bounds), *zip(*bounds)))
    return np.vstack(parts)


def summarize(values: np.ndarray) -> dict:
    """Mean, variance and their standard errors with compensated sums."""
    v = np.asarray(values, dtype=float)
    r = v.size
    mean = math.fsum(v) / r
    dev = v - mean
    var = math.fsum(dev * dev) / (r - 1)
    m4 = math.fsum(dev**4) / r
    m2 = math.fsum(dev * dev) / r
    return {
        "mean": mean,
        "variance": var,
        "se_mean": math.sqrt(var / r),
        "se_variance": math.sqrt(max(m4 - m2 * m2, 0.0) / r),
    }


def shape_diagnostics(z: np.ndarray) -> dict:
    return {
        "ks_distance": float(stats.kstest(z, "norm").statistic),
        "skewness": float(stats.skew(z)),
        "excess_kurtosis": float(stats.kurtosis(z, fisher=True)),
    }


def _zscore(estimate: float, target: float, se: float) -> float:
    if se == 0.0:
        return 0.0 if estimate == target else math.copysign(math.inf, estimate - target)
    return (estimate - target) / se


def run_experiment(cfg: McConfig, raw_csv: str | None = None) -> McReport:
    t0 = time.perf_counter()
    raw = run_replications(cfg)
    exp = _Experiment(cfg)
    col = raw[:, 0]
    summ = summarize(col)
    report = McReport(kind=cfg.kind, replications=cfg.replications, config=cfg.to_dict(), **summ)
    if cfg.kind == "clt_quartet":
        report.__dict__.update(shape_diagnostics(col))
        report.z_scores = {"mean_zero": _zscore(summ["mean"], 0.0, summ["se_mean"]),
                           "variance_one": _zscore(summ["variance"], 1.0, summ["se_variance"])}
        report.extra = {"expected_m": exp.mean_m, "exact_variance_m": exp.var_m,
                        "asymptotic_variance": asymptotic_variance_quartet(exp.sigmas),
                        "sizes": list(cfg.sizes())}
    elif cfg.kind == "clt_cpc":
        report.__dict__.update(shape_diagnostics(col))
        th = summarize(raw[:, 1])
        th_alt = summarize(raw[:, 2])
        report.z_scores = {
            "mean_zero": _zscore(summ["mean"], 0.0, summ["se_mean"]),
            "variance_one": _zscore(summ["variance"], 1.0, summ["se_variance"]),
            "theta_hat_unbiased": _zscore(th["mean"], exp.theta, th["se_mean"]),
            "theta_hat_alt_unbiased": _zscore(th_alt["mean"], exp.theta, th_alt["se_mean"]),
        }
        report.extra = {"theta": exp.theta, "theta_hat": th, "theta_hat_alt": th_alt,
                        "exact_variance": exp.var_exact, "asymptotic_variance": exp.var_asym,
                        "sizes": list(cfg.sizes())}
    elif cfg.kind == "size_power":
        rate = math.fsum(raw[:, 1]) / cfg.replications
        report.rejection_rate = rate
        report.rejection_se = math.sqrt(rate * (1 - rate) / cfg.replications)
        report.extra = {"theta": exp.theta, "binomial_se_at_alpha":
                        math.sqrt(cfg.alpha * (1 - cfg.alpha) / cfg.replications),
                        "sizes": list(cfg.sizes())}
    else:
        spec = exp.spec
        target_mean = math.prod(spec.ns) * trace_product(spec.sigmas)
        target_var = exact_variance_trace_product(spec)
        qv = summarize(raw[:, 1])
        report.z_scores = {
            "trace_mean": _zscore(summ["mean"], target_mean, summ["se_mean"]),
            "trace_variance": _zscore(summ["variance"], target_var, summ["se_variance"]),
            "quadratic_variation_mean": _zscore(qv["mean"], exp.var_m, qv["se_mean"]),
        }
        report.extra = {"expected_trace": target_mean, "exact_variance_trace": target_var,
                        "exact_variance_m": exp.var_m, "quadratic_variation": qv,
                        "max_telescoping_error": float(np.max(np.abs(raw[:, 2]))),
                        "sizes": list(cfg.sizes())}
    report.metadata = {"runtime_seconds": time.perf_counter() - t0, "workers": cfg.workers}
    if raw_csv is not None:
        write_raw_csv(raw, cfg.kind, raw_csv)
    return report


_RAW_COLUMNS = {
    "clt_quartet": ("z", "m"),
    "clt_cpc": ("z", "theta_hat", "theta_hat_alt"),
    "size_power": ("statistic_t", "reject"),
    "moment_validation": ("trace_product", "quadratic_variation", "telescoping_error"),
}


def write_raw_csv(raw: np.ndarray, kind: str, path: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["replication", *_RAW_COLUMNS[kind]])
        for i, row in enumerate(raw):
            w.writerow([i, *(f"{v:.17g}" for v in row)])


PRESETS: dict[str, Callable[[], dict]] = {
    "size": lambda: {"kind": "size_power", "p": 100, "ns": [40, 40], "replications": 2000,
                     "alpha": 0.05, "pair": {"family": "null"}},
    "power": lambda: {"kind": "size_power", "p": 100, "ns": [60, 60], "replications": 2000,
                      "alpha": 0.05, "pair": {"family": "rotated", "high": 3, "low": 1}},
    "clt-quartet": lambda: {"kind": "clt_quartet", "p": 200, "delta": 0.7, "replications": 2000},
    "clt-cpc": lambda: {"kind": "clt_cpc", "p": 200, "ns": [40, 40], "replications": 2000},
    "moments-scalar": lambda: {"kind": "moment_validation", "p": 1, "ns": [1, 1, 1, 1],
                               "replications": 200_000},
    "moments-p2": lambda: {"kind": "moment_validation", "p": 2, "ns": [2, 3, 4, 5],
                           "replications": 200_000,
                           "sigmas": [{"family": "random", "seed": s} for s in range(4)]},
}


def run_clt_quartet(config: McConfig) -> McReport:
    return run_experiment(_expect(config, "clt_quartet"))


def run_clt_cpc(config: McConfig) -> McReport:
    return run_experiment(_expect(config, "clt_cpc"))


def run_size_power(config: McConfig) -> McReport:
    return run_experiment(_expect(config, "size_power"))


def run_moment_validation(config: McConfig) -> McReport:
    return run_experiment(_expect(config, "moment_validation"))


def _expect(cfg: McConfig, kind: str) -> McConfig:
    if cfg.kind != kind:
        raise InvalidParameterError(f"config kind is {cfg.kind!r}, expected {kind!r}")
    return cfg

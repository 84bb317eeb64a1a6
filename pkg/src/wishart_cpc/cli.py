"""Command-line interface.

Exit codes: 0 success, 2 usage or parse error, 3 insufficient data,
4 degenerate variance estimate.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import io as wio
from .covmodel import CovariancePair, SpdMatrix, commutator_theta
from .cpc_test import run_cpc_test, split_four
from .exceptions import DegenerateVarianceError, InsufficientDataError, WishartCPCError
from .gauss_moments import central_moment, mixed_quad_expectation, quad_moment
from .harness import PRESETS, McConfig, build_sigma, run_experiment
from .trace_moments import (
    WishartQuartetSpec,
    asymptotic_variance_cpc,
    asymptotic_variance_quartet,
    exact_variance_m,
    exact_variance_trace_product,
    expected_m,
)

SEED_ENV = "WISHART_CPC_SEED"
EXIT_USAGE, EXIT_INSUFFICIENT, EXIT_DEGENERATE = 2, 3, 4


class CliError(Exception):
    def __init__(self, message, code=EXIT_USAGE):
        super().__init__(message)
        self.code = code


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise CliError(f"{SEED_ENV} must be an integer, got {raw!r}")


def _emit(payload, output):
    text = wio.dumps(payload) + "\n"
    if output:
        with open(output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read {path}: {exc}")


def _read_sample(path, header):
    try:
        return wio.read_sample_csv(path, header=header, label=os.path.basename(path))
    except (OSError, ValueError) as exc:
        if isinstance(exc, InsufficientDataError):
            raise CliError(str(exc), EXIT_INSUFFICIENT)
        raise CliError(f"cannot parse {path}: {exc}")


def cmd_test(args):
    if not 0.0 < args.alpha < 1.0:
        raise CliError(f"--alpha must lie in (0, 1), got {args.alpha}")
    x = _read_sample(args.x_csv, args.header)
    y = _read_sample(args.y_csv, args.header)
    if x.p != y.p:
        raise CliError(f"column counts differ: {x.p} vs {y.p}")
    seed = _default_seed() if args.seed is None else args.seed
    report = run_cpc_test(x, y, args.alpha, seed, args.sigma_mode)
    _emit(report.to_dict(), args.output)


def cmd_simulate(args):
    if args.preset:
        if args.preset not in PRESETS:
            raise CliError(f"unknown preset {args.preset!r}; choose from {sorted(PRESETS)}")
        payload = PRESETS[args.preset]()
    elif args.config:
        payload = _load_json(args.config)
    else:
        raise CliError("give a config file or --preset")
    if args.seed is not None:
        payload["base_seed"] = args.seed
    elif "base_seed" not in payload and os.environ.get(SEED_ENV) is not None:
        payload["base_seed"] = _default_seed()
    if args.workers:
        payload["workers"] = args.workers
    if args.replications:
        payload["replications"] = args.replications
    try:
        cfg = McConfig.from_dict(payload)
    except (TypeError, ValueError) as exc:
        raise CliError(f"invalid config: {exc}")
    _emit(run_experiment(cfg, raw_csv=args.raw_csv).to_dict(), args.output)


def _matrix(spec, p):
    try:
        if isinstance(spec, list):
            return np.asarray(spec, dtype=float)
        return build_sigma(spec, p)
    except (AttributeError, KeyError, TypeError, ValueError) as exc:
        raise CliError(f"invalid matrix spec {spec!r}: {exc}")


def cmd_moments(args):
    payload = _load_json(args.spec_json)
    out = {}
    p = payload.get("p")
    try:
        if "quartet" in payload:
            q = payload["quartet"]
            specs = q.get("sigmas", [None] * 4)
            if p is None and isinstance(specs[0], list):
                p = len(specs[0])
            if p is None:
                raise CliError("moments spec needs p unless matrices are explicit")
            sigmas = [SpdMatrix(_matrix(s, p)).entries for s in specs]
            spec = WishartQuartetSpec(q["ns"], sigmas)
            out["expected_m"] = expected_m(spec)
            out["expected_trace_product"] = expected_m(spec) * spec.r_p
            out["exact_variance_trace_product"] = exact_variance_trace_product(spec)
            out["exact_variance_m"] = exact_variance_m(spec)
            out["asymptotic_variance_quartet"] = asymptotic_variance_quartet(sigmas)
            out["r_p"] = spec.r_p
        if "pair" in payload:
            pr = payload["pair"]
            if p is None and isinstance(pr["sigma_x"], list):
                p = len(pr["sigma_x"])
            sx = SpdMatrix(_matrix(pr["sigma_x"], p))
            sy = SpdMatrix(_matrix(pr["sigma_y"], p))
            out["theta"] = commutator_theta(CovariancePair(sx, sy))
            out["asymptotic_variance_cpc"] = asymptotic_variance_cpc(sx.entries, sy.entries)
        results = []
        for item in payload.get("quadratic", []):
            kind = item.get("kind", "raw")
            if kind == "raw":
                value = quad_moment(item["matrix"], item["order"])
            elif kind == "central":
                value = central_moment(item["matrix"], item["order"])
            elif kind == "mixed":
                value = mixed_quad_expectation(item["matrices"])
            else:
                raise CliError(f"unknown quadratic kind {kind!r}")
            results.append({**item, "value": value})
        if results:
            out["quadratic"] = results
    except (KeyError, TypeError, IndexError, ValueError) as exc:
        if isinstance(exc, WishartCPCError):
            raise CliError(str(exc))
        raise CliError(f"invalid moments spec: {exc!r}")
    except WishartCPCError as exc:
        raise CliError(str(exc))
    if not out:
        raise CliError("moments spec requests nothing (use quartet, pair, or quadratic)")
    _emit(out, args.output)


def cmd_clt_check(args):
    if args.which == "quartet":
        payload = {"kind": "clt_quartet", "p": args.p, "delta": args.delta}
    else:
        m = args.m if args.m else None
        payload = {"kind": "clt_cpc", "p": args.p}
        if m:
            payload["ns"] = [m, m]
        else:
            payload["delta"] = args.delta
    payload.update(replications=args.replications, base_seed=args.seed or 0,
                   workers=args.workers, standardize=args.standardize)
    try:
        cfg = McConfig.from_dict(payload)
    except ValueError as exc:
        raise CliError(str(exc))
    _emit(run_experiment(cfg, raw_csv=args.raw_csv).to_dict(), args.output)


def cmd_split_info(args):
    x = _read_sample(args.csv, args.header)
    seed = _default_seed() if args.seed is None else args.seed
    split = split_four(x, seed)
    _emit({"n": x.n, "p": x.p, "block_size": split.blocks[0].n,
           "n_discarded": split.n_discarded, "seed": seed}, args.output)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wishart-cpc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    header = argparse.ArgumentParser(add_help=False)
    header.add_argument("--header", dest="header", action="store_const", const=True, default=None,
                        help="first CSV row is a header (default: auto-detect)")
    header.add_argument("--no-header", dest="header", action="store_const", const=False)
    out = argparse.ArgumentParser(add_help=False)
    out.add_argument("-o", "--output", help="write JSON here instead of stdout")

    p = sub.add_parser("test", parents=[header, out], help="run the CPC test on two CSV samples")
    p.add_argument("x_csv")
    p.add_argument("y_csv")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=None, help=f"split seed (default ${SEED_ENV} or 0)")
    p.add_argument("--sigma-mode", choices=("normalized", "literal"), default="normalized")
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("simulate", parents=[out], help="run a Monte Carlo experiment")
    p.add_argument("config", nargs="?", help="McConfig JSON file")
    p.add_argument("--preset", help=f"built-in config: {', '.join(sorted(PRESETS))}")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--replications", type=int, default=None)
    p.add_argument("--raw-csv", help="dump per-replication values to this CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("moments", parents=[out], help="evaluate exact moment formulas")
    p.add_argument("spec_json")
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("clt-check", parents=[out], help="CLT shape diagnostics")
    p.add_argument("--which", choices=("quartet", "cpc"), default="quartet")
    p.add_argument("--p", type=int, default=200)
    p.add_argument("--delta", type=float, default=0.7)
    p.add_argument("--m", type=int, default=None, help="CPC subsample size (overrides delta)")
    p.add_argument("--replications", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--standardize", choices=("exact", "asymptotic"), default="exact")
    p.add_argument("--raw-csv")
    p.set_defaults(func=cmd_clt_check)

    p = sub.add_parser("split-info", parents=[header, out], help="show how a sample would be split")
    p.add_argument("csv")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_split_info)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except InsufficientDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INSUFFICIENT
    except DegenerateVarianceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except WishartCPCError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return 0


if __name__ == "__main__":
    sys.exit(main())

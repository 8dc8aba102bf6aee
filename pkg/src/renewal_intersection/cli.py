"""Command-line front end: law -> mass -> intersect -> verify / simulate.

Exit codes: 0 success, 1 a verdict failed, 2 usage error, 3 malformed
config or law spec, 4 horizon overflow, 5 inapplicable case, 6 numerical
failure.  On a nonzero exit a JSON failure list goes to stderr (and to
``failures.json`` when ``--out`` is given).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from ._io import json_text, write_json
from .asymptotics import CASES, InapplicableCase, compare, geometric_grid
from .engine import mass_function
from .intersect import build
from .laws import (GapLaw, SlowVaryDesc, build_reg_varying, deterministic_law, geometric_law,
                   law_from_dict, ssrw_return_law)
from .montecarlo import (coupled_increment, estimate_hitting_mean, estimate_rho_mean,
                         estimate_rho_tail)

EXIT_OK = 0
EXIT_VERDICT = 1
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_HORIZON = 4
EXIT_CASE = 5
EXIT_NUMERIC = 6


class ConfigError(ValueError):
    pass


class HorizonError(ValueError):
    pass


# default laws, horizon and grid per case: (tau, sigma or None, nmax, grid start)
CASE_DEFAULTS = {
    "jain-pruitt": ("ssrw", "ssrw", 2**20, 2**10),
    "geometric-exact": ("geometric:0.5", "geometric:0.3", 64, 1),
    "renewal-mass": ("ssrw", None, 2**16, 2**7),
    "rho-tail": ("regvar:0.7", "regvar:0.7", 2**17, 2**10),
    "rho-tail-frenk": ("regvar:1.5", "regvar:2.5", 2**17, 2**10),
    "rho-pmf": ("regvar:0.7", "regvar:0.7", 2**17, 2**10),
    "transient": ("regvar:1.5:0.3", "regvar:1.5:0.4", 2**17, 2**10),
    "gatga01": ("regvar:0.7", "regvar:0.7", 2**17, 2**10),
    "case2": ("ssrw", "ssrw", 2**20, 2**10),
    "ga01-tga-gt1": ("regvar:0.6", "regvar:1.5", 2**17, 2**10),
    "frenk": ("regvar:2.5", None, 2**17, 2**10),
    "rogozin": ("regvar:2.5", None, 2**17, 2**10),
}
SINGLE_LAW_CASES = {"renewal-mass", "frenk", "rogozin"}


# ---------------------------------------------------------------- law specs


def parse_law(spec: str, horizon: int) -> GapLaw:
    """``path.json`` or ``[builtin:]name[:params]``.

    Names: ``ssrw``, ``deterministic``, ``geometric:p`` and
    ``regvar:alpha[:defect[:phi_const[:log_power]]]``.
    """
    if spec.endswith(".json") or Path(spec).is_file():
        try:
            d = json.loads(Path(spec).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read law file {spec}: {exc}") from exc
        stored = int(d.get("horizon", horizon))
        if d.get("kind") == "custom" and horizon > stored:
            return law_from_dict(d, horizon)
        if horizon > stored:
            raise HorizonError(f"N={horizon} exceeds horizon {stored} of {spec}")
        return law_from_dict(d, stored)
    body = spec[len("builtin:"):] if spec.startswith("builtin:") else spec
    name, *params = body.split(":")
    try:
        vals = [float(p) for p in params]
        if name == "ssrw" and not vals:
            return ssrw_return_law(horizon)
        if name == "deterministic" and not vals:
            return deterministic_law(horizon)
        if name == "geometric" and len(vals) == 1:
            return geometric_law(vals[0], horizon)
        if name == "regvar" and 1 <= len(vals) <= 4:
            alpha = vals[0]
            defect = vals[1] if len(vals) > 1 else 0.0
            phi = SlowVaryDesc(vals[2] if len(vals) > 2 else 1.0, vals[3] if len(vals) > 3 else 0.0)
            return build_reg_varying(alpha, phi, max(horizon, 16), defect)
    except ValueError as exc:
        raise ConfigError(f"bad law spec {spec!r}: {exc}") from exc
    raise ConfigError(f"unknown law spec {spec!r}")


def parse_grid(spec: str | None, start: int, stop: int) -> np.ndarray:
    """``geometric:start:stop:ratio`` clipped to [1, stop]; default ratio-2 grid."""
    if spec is None:
        return geometric_grid(start, stop, 2.0)
    parts = spec.split(":")
    if parts[0] != "geometric" or len(parts) != 4:
        raise ConfigError(f"bad grid spec {spec!r}; expected geometric:start:stop:ratio")
    try:
        a, b, r = int(float(parts[1])), int(float(parts[2])), float(parts[3])
    except ValueError as exc:
        raise ConfigError(f"bad grid spec {spec!r}") from exc
    if b > stop:
        raise HorizonError(f"grid end {b} exceeds N={stop}")
    try:
        return geometric_grid(a, b, r)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------- config


@dataclass
class RunConfig:
    tau: str | None = None
    sigma: str | None = None
    n: int | None = None
    method: str = "fft"
    cases: list = field(default_factory=list)
    grid: str | None = None
    seed: int | None = None
    samples: int = 10**5
    out: str | None = None

    @classmethod
    def from_args(cls, args) -> "RunConfig":
        cfg = cls()
        if getattr(args, "config", None):
            try:
                raw = json.loads(Path(args.config).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
            if not isinstance(raw, dict):
                raise ConfigError("config must be a JSON object")
            unknown = set(raw) - set(cls.__dataclass_fields__)
            if unknown:
                raise ConfigError(f"unknown config keys: {sorted(unknown)}")
            for k, v in raw.items():
                setattr(cfg, k, v)
        for name in ("tau", "sigma", "n", "method", "grid", "seed", "samples", "out"):
            v = getattr(args, name, None)
            if v is not None:
                setattr(cfg, name, v)
        if getattr(args, "case", None):
            cfg.cases = list(args.case)
        if cfg.method not in ("naive", "fft"):
            raise ConfigError(f"method must be naive or fft, not {cfg.method!r}")
        if cfg.n is not None and int(cfg.n) < 1:
            raise ConfigError("N must be positive")
        return cfg


# ---------------------------------------------------------------- commands


def _out_dir(cfg: RunConfig) -> Path:
    return Path(cfg.out if cfg.out is not None else ".")


def cmd_law(args) -> int:
    law = parse_law(args.spec, args.horizon)
    if args.out:
        law.save(args.out)
    else:
        sys.stdout.write(law.to_json() + "\n")
    return EXIT_OK


def cmd_mass(args) -> int:
    cfg = RunConfig.from_args(args)
    if cfg.tau is None or cfg.n is None:
        raise ConfigError("mass needs --tau and --n")
    law = parse_law(cfg.tau, int(cfg.n))
    mass_function(law, int(cfg.n), cfg.method).to_csv(_out_dir(cfg) / "mass.csv")
    return EXIT_OK


def cmd_intersect(args) -> int:
    cfg = RunConfig.from_args(args)
    if cfg.tau is None or cfg.sigma is None or cfg.n is None:
        raise ConfigError("intersect needs --tau, --sigma and --n")
    N = int(cfg.n)
    tau = parse_law(cfg.tau, N)
    sigma = tau if cfg.sigma == cfg.tau else parse_law(cfg.sigma, N)
    model = build(tau, sigma, N, cfg.method)
    out = _out_dir(cfg)
    model.to_csv(out / "model.csv")
    model.summary_json(out / "classification.json")
    return EXIT_OK


def _run_case(case: str, cfg: RunConfig):
    if case not in CASES:
        raise InapplicableCase(f"unknown case {case!r}")
    d_tau, d_sigma, d_n, d_start = CASE_DEFAULTS[case]
    N = int(cfg.n) if cfg.n is not None else d_n
    grid = parse_grid(cfg.grid, min(d_start, N), N)
    tau_spec = cfg.tau or d_tau
    tau = parse_law(tau_spec, N)
    if case in SINGLE_LAW_CASES:
        return compare(mass_function(tau, N, cfg.method), case, grid)
    sigma_spec = cfg.sigma or d_sigma
    sigma = tau if sigma_spec == tau_spec else parse_law(sigma_spec, N)
    return compare(build(tau, sigma, N, cfg.method), case, grid)


def cmd_verify(args) -> int:
    cfg = RunConfig.from_args(args)
    if not cfg.cases:
        raise ConfigError("verify needs at least one --case")
    out = _out_dir(cfg)
    verdicts, failures = [], []
    for case in cfg.cases:
        t0 = time.perf_counter()
        report = _run_case(case, cfg)
        report.to_csv(out / f"{case}.csv")
        report.to_json(out / f"{case}.json")
        v = report.verdict()
        verdicts.append(v)
        if not v["trend_ok"]:
            failures.append({"case_id": case, "reason": "trend", "final_ratio": v["final_ratio"]})
        print(f"{case}: final_ratio={v['final_ratio']:.6g} trend_ok={v['trend_ok']} "
              f"({time.perf_counter() - t0:.1f}s)", file=sys.stderr)
    write_json(out / "verdicts.json", {"verdicts": verdicts, "failures": failures})
    if failures:
        _report_failures(failures, cfg)
        return EXIT_VERDICT
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = RunConfig.from_args(args)
    if cfg.seed is None:
        raise ConfigError("simulate needs --seed")
    if cfg.tau is None:
        raise ConfigError("simulate needs --tau")
    sigma_spec = cfg.sigma or cfg.tau
    stat = args.statistic
    runs, seed = int(cfg.samples), int(cfg.seed)
    if stat in ("rho_tail", "coupled_increment"):
        N = int(cfg.n) if cfg.n is not None else 1000
        grid = parse_grid(cfg.grid, 1, N) if cfg.grid else geometric_grid(1, N, 10.0)
        tau = parse_law(cfg.tau, N)
        if stat == "rho_tail":
            sigma = tau if sigma_spec == cfg.tau else parse_law(sigma_spec, N)
            estimates = estimate_rho_tail(tau, sigma, grid, runs, seed, args.workers)
        else:
            ci = coupled_increment(tau, grid, runs, seed, args.workers)
            estimates = ci.bound + ci.difference
    else:
        N = int(cfg.n) if cfg.n is not None else 10**6
        table = min(N, 2**16)
        tau = parse_law(cfg.tau, table)
        sigma = tau if sigma_spec == cfg.tau else parse_law(sigma_spec, table)
        fn = estimate_rho_mean if stat == "rho_mean" else estimate_hitting_mean
        estimates = [fn(tau, sigma, N, runs, seed, args.workers)]
    text = json_text([e.to_dict() for e in estimates])
    if cfg.out is not None:
        write_json(_out_dir(cfg) / "simulate.json", [e.to_dict() for e in estimates])
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _report_failures(failures, cfg: RunConfig | None) -> None:
    sys.stderr.write(json_text({"failures": failures}))
    if cfg is not None and cfg.out is not None:
        try:
            write_json(_out_dir(cfg) / "failures.json", {"failures": failures})
        except OSError:
            pass


# ---------------------------------------------------------------- parser


def _common(p, *, sigma=True, cases=False):
    p.add_argument("--config", help="JSON file with RunConfig fields")
    p.add_argument("--tau", help="law file or builtin:name:params")
    if sigma:
        p.add_argument("--sigma", help="law file or builtin:name:params")
    p.add_argument("--n", "--nmax", dest="n", type=int, help="horizon N")
    p.add_argument("--method", choices=("naive", "fft"))
    p.add_argument("--out", help="output directory")
    if cases:
        p.add_argument("--case", action="append", help="case id (repeatable): "
                       + ", ".join(CASES))
        p.add_argument("--grid", help="geometric:start:stop:ratio")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="renewal-intersection", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("law", help="write a law as JSON")
    p.add_argument("spec")
    p.add_argument("--horizon", type=int, default=1024)
    p.add_argument("--out", help="output file (stdout if omitted)")
    p.set_defaults(func=cmd_law)

    p = sub.add_parser("mass", help="renewal mass function CSV")
    _common(p, sigma=False)
    p.set_defaults(func=cmd_mass)

    p = sub.add_parser("intersect", help="intersection model CSV and classification JSON")
    _common(p)
    p.set_defaults(func=cmd_intersect)

    p = sub.add_parser("verify", help="exact vs asymptotic reports")
    _common(p, cases=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("simulate", help="Monte Carlo estimates as JSON")
    _common(p)
    p.add_argument("--grid", help="geometric:start:stop:ratio")
    p.add_argument("--seed", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--statistic", default="rho_tail",
                   choices=("rho_tail", "rho_mean", "hitting_index", "coupled_increment"))
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except HorizonError as exc:
        code, kind, err = EXIT_HORIZON, "horizon", exc
    except InapplicableCase as exc:
        code, kind, err = EXIT_CASE, "inapplicable", exc
    except ConfigError as exc:
        code, kind, err = EXIT_CONFIG, "config", exc
    except (ValueError, ArithmeticError) as exc:
        if "horizon" in str(exc):
            code, kind, err = EXIT_HORIZON, "horizon", exc
        else:
            code, kind, err = EXIT_NUMERIC, "numeric", exc
    failures = [{"reason": kind, "message": str(err)}]
    out = getattr(args, "out", None)
    cfg = RunConfig(out=out) if out and args.command != "law" else None
    _report_failures(failures, cfg)
    return code


if __name__ == "__main__":
    sys.exit(main())

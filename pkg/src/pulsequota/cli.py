"""``pulsequota`` command line: validate | simulate | closures | deterministic | average | sweep.

Exit codes: 0 ok, 1 config error, 2 hypothesis failure, 3 bound violation,
4 runtime error or inconclusive ensemble.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
import time
from dataclasses import replace
from fractions import Fraction
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, TextIO, Tuple

from . import __version__
from .analytics import closure_expectation_bounds
from .config import RunConfig, dump_config, load_config
from .deterministic import det_closure_length, det_length_bounds, det_trajectory
from .exceptions import ConfigError, HypothesisError, ModelError
from .montecarlo import SWEEP_AXES, EnsembleSummary, long_run_average_no_harvest, run_ensemble, sweep
from .rates import ConstantRate, check_h1, check_h2, rate_bounds
from .sde import run_path

logger = logging.getLogger("pulsequota")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_HYPOTHESIS = 2
EXIT_BOUND = 3
EXIT_RUNTIME = 4

MAX_TRAJECTORY_FILES = 100


def _fmt(value, none="none") -> str:
    if value is None:
        return none
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _block(pairs: Iterable[Tuple[str, object]]) -> str:
    return "".join(f"{k}={v if isinstance(v, str) else _fmt(v)}\n" for k, v in pairs)


def _ensure_dir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from None
    return out


def _write(path: Path, text: str) -> None:
    path.write_text(text)


def write_trajectory_csv(path: Path, t, n, event) -> None:
    lines = ["t,n,event\n"]
    lines.extend(f"{a!r},{b!r},{e}\n" for a, b, e in zip(t.tolist(), n.tolist(), event.tolist()))
    path.write_text("".join(lines))


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# validate

def cmd_validate(cfg: RunConfig, out: TextIO) -> int:
    law, policy, noise = cfg.law, cfg.policy, cfg.noise
    h1 = check_h1(law)
    rb = rate_bounds(law, policy.k_plus)
    pairs: List[Tuple[str, object]] = [
        ("h1", h1.holds), ("K", h1.k),
        ("alpha", rb.alpha), ("beta", rb.beta), ("b_script", rb.b_script),
        ("half_sigma_sq", noise.half_variance),
    ]
    h2 = check_h2(law, noise, policy) if (h1.holds or isinstance(law, ConstantRate)) else None
    pairs += [("h2", _fmt(None if h2 is None else h2.holds, "not-applicable")),
              ("k0_max", _fmt(None if h2 is None else h2.k0_max, "none"))]
    try:
        pairs.append(("det_closure_length", det_closure_length(law, policy)))
    except ModelError:
        pairs.append(("det_closure_length", "infinite"))
    try:
        d_lo, d_hi = det_length_bounds(policy, rb)
        pairs += [("det_bound_lo", d_lo), ("det_bound_hi", "unbounded" if math.isinf(d_hi) else d_hi)]
    except ModelError:
        pairs += [("det_bound_lo", "none"), ("det_bound_hi", "unbounded")]
    try:
        lo, hi = closure_expectation_bounds(rb, noise, policy)
        pairs += [("lo", lo), ("hi", str(hi))]
    except HypothesisError:
        pairs += [("lo", "none"), ("hi", "unbounded")]
    ok = h1.holds and h2 is not None and h2.holds
    pairs.append(("verdict", "ok" if ok else "hypothesis-failure"))
    out.write(_block(pairs))
    return EXIT_OK if ok else EXIT_HYPOTHESIS


# simulate

def cmd_simulate(cfg: RunConfig, out_dir, out: TextIO, paths: Optional[int] = None) -> int:
    paths = cfg.paths if paths is None else paths
    if paths < 1:
        raise ModelError(f"paths must be >= 1, got {paths}")
    policy = cfg.policy
    target = _ensure_dir(out_dir)
    files, closure_rows = [], ["path_id,k,open_time,length,censored,from_reset\n"]
    for i in range(paths):
        record = cfg.csv and i < MAX_TRAJECTORY_FILES
        run = run_path(cfg.law, policy, cfg.noise, cfg.sim, cfg.start, i, record=record)
        if record:
            name = f"path_{i:05d}.csv"
            write_trajectory_csv(target / name, run.t, run.n, run.event)
            files.append(name)
        for rec in run.closures():
            closure_rows.append(f"{i},{rec.k},{_fmt(rec.open_time, '')},{rec.length!r},"
                                f"{int(rec.censored)},{int(rec.from_reset)}\n")
    _write(target / "closures.csv", "".join(closure_rows))
    files.append("closures.csv")
    _write(target / "run_config.ini", dump_config(replace(cfg, paths=paths)))
    manifest = {
        "command": "simulate",
        "version": __version__,
        "config": "run_config.ini",
        "paths": paths,
        "seed": cfg.sim.seed,
        "stream_offset": 0,
        "path_ids": [0, paths - 1],
        "replay": f"pulsequota simulate --config run_config.ini --paths {paths} --out DIR",
        "sha256": {name: _sha256(target / name) for name in files},
    }
    _write(target / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    out.write(_block([("paths", paths), ("trajectory_files", len(files) - 1),
                      ("closure_rows", len(closure_rows) - 1), ("out", str(target))]))
    return EXIT_OK


# closures

def read_bounds_file(path) -> Tuple[float, Optional[float]]:
    """JSON object ``{"lo": float, "hi": float | null}``; null means unbounded."""
    try:
        data = json.loads(Path(path).read_text())
        lo = float(data["lo"])
        hi = data.get("hi")
        return lo, None if hi is None else float(hi)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"bad bounds file {path}: {exc}") from None


def summary_pairs(s: EnsembleSummary) -> List[Tuple[str, object]]:
    ci = s.ci95 or (None, None)
    return [
        ("paths", s.paths), ("closures_observed", s.closures_observed), ("censored", s.censored),
        ("mean_length", _fmt(s.mean_length)), ("std_error", _fmt(s.std_error)),
        ("ci95_lo", _fmt(ci[0])), ("ci95_hi", _fmt(ci[1])),
        ("bound_lo", _fmt(s.bound_lo)), ("bound_hi", _fmt(s.bound_hi, "unbounded")),
        ("lo_satisfied", _fmt(s.lo_satisfied, "not-applicable")),
        ("hi_satisfied", _fmt(s.hi_satisfied, "not-applicable")),
        ("envelope_violation_rate", s.envelope_violation_rate),
        ("envelope_steps", s.envelope_steps), ("clamp_activations", s.clamp_activations),
        ("yield_rate", _fmt(s.yield_rate)), ("per_path_mean", _fmt(s.per_path_mean)),
        ("h2_holds", s.h2_holds), ("inconclusive", s.inconclusive),
    ]


def _summary_exit(s: EnsembleSummary) -> int:
    if s.inconclusive:
        return EXIT_RUNTIME
    return EXIT_OK if s.bounds_ok else EXIT_BOUND


def cmd_closures(cfg: RunConfig, out_dir, out: TextIO, paths: Optional[int] = None,
                 bounds_file=None, workers: Optional[int] = None) -> int:
    override = read_bounds_file(bounds_file) if bounds_file else None
    paths = cfg.paths if paths is None else paths
    summary = run_ensemble(cfg.law, cfg.policy, cfg.noise, cfg.sim, cfg.n0, paths,
                           workers=workers if workers is not None else cfg.workers,
                           bounds_override=override)
    text = _block(summary_pairs(summary))
    target = _ensure_dir(out_dir)
    _write(target / "summary.txt", text)
    _write(target / "summary.json", json.dumps(summary.as_dict(), indent=2, sort_keys=True) + "\n")
    out.write(text)
    return _summary_exit(summary)


# deterministic

def cmd_deterministic(cfg: RunConfig, out_dir, out: TextIO) -> int:
    policy = cfg.policy
    length = det_closure_length(cfg.law, policy)
    d_lo, d_hi = det_length_bounds(policy, rate_bounds(cfg.law, policy.k_plus))
    traj = det_trajectory(cfg.law, policy, cfg.start, cfg.sim.dt, cfg.sim.t_max)
    target = _ensure_dir(out_dir)
    if cfg.csv:
        write_trajectory_csv(target / "deterministic.csv", traj.t, traj.n, traj.event)
    rows = ["k,time,gap\n"]
    prev = None
    for k, tc in enumerate(traj.events):
        rows.append(f"{k},{tc!r},{_fmt(None if prev is None else tc - prev, '')}\n")
        prev = tc
    _write(target / "periods.csv", "".join(rows))
    gaps = traj.gaps
    out.write(_block([
        ("closure_length", length), ("bound_lo", d_lo),
        ("bound_hi", "unbounded" if math.isinf(d_hi) else d_hi),
        ("pulses", len(traj.events)),
        ("mean_gap", float(gaps.mean()) if gaps.size else "none"),
    ]))
    for k, tc in enumerate(traj.events):
        out.write(f"pulse_{k}={tc!r}\n")
    return EXIT_OK


# average

def cmd_average(cfg: RunConfig, out_dir, out: TextIO) -> int:
    avg, target_value = long_run_average_no_harvest(cfg.law, cfg.noise, cfg.sim, cfg.start,
                                                    cfg.burn_in_fraction)
    pairs = [("average", avg), ("target", target_value),
             ("relative_error", abs(avg - target_value) / target_value),
             ("t_max", cfg.sim.t_max), ("burn_in_fraction", cfg.burn_in_fraction),
             ("seed", cfg.sim.seed)]
    text = _block(pairs)
    _write(_ensure_dir(out_dir) / "average.txt", text)
    out.write(text)
    return EXIT_OK


# sweep

def parse_values(text: str) -> List[float]:
    try:
        return [float(Fraction(v.strip())) for v in text.split(",") if v.strip()]
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"--values must be a comma-separated list of numbers, got {text!r}") from None


def cmd_sweep(cfg: RunConfig, out_dir, out: TextIO, axis: str, values: Sequence[float],
              paired: bool = False, workers: Optional[int] = None) -> int:
    if not values:
        raise ConfigError("--values is empty")
    results = sweep(cfg.scenario(), axis, values, paired=paired,
                    workers=workers if workers is not None else cfg.workers)
    records, code = [], EXIT_OK
    for value, s in zip(values, results):
        out.write(f"[{axis}={value!r}]\n")
        out.write(_block(summary_pairs(s)))
        records.append({"axis": axis, "value": value, **s.as_dict()})
        code = max(code, _summary_exit(s))
    _write(_ensure_dir(out_dir) / "sweep.json", json.dumps(records, indent=2, sort_keys=True) + "\n")
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pulsequota", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True,
                       help="config file, or a bundled name (logistic, malthusian)")
        p.add_argument("--seed", type=int, help="override [sim] seed")
        p.add_argument("--out", help="output directory (default: [io] out)")
        p.add_argument("-v", "--verbose", action="store_true")
        return p

    add("validate", "check H1/H2 and print the bound table")
    p = add("simulate", "write trajectory CSVs and a replay manifest")
    p.add_argument("--paths", type=int)
    p = add("closures", "ensemble closure-length summary")
    p.add_argument("--paths", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--bounds", help="JSON file overriding the expected-closure bounds")
    add("deterministic", "noise-free trajectory and period table")
    p = add("average", "long-run time average without harvest")
    p.add_argument("--t-max", type=float, dest="t_max", help="override [sim] t_max")
    p = add("sweep", "one ensemble per value of a parameter")
    p.add_argument("--paths", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--axis", required=True, choices=SWEEP_AXES)
    p.add_argument("--values", required=True, help="comma-separated, fractions allowed")
    p.add_argument("--paired", action="store_true", help="same random streams for every value")
    return parser


def run(args: argparse.Namespace, out: TextIO) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, sim=replace(cfg.sim, seed=args.seed))
    if getattr(args, "t_max", None) is not None:
        cfg = replace(cfg, sim=replace(cfg.sim, t_max=args.t_max))
    if getattr(args, "paths", None) is not None and args.paths < 1:
        raise ConfigError(f"--paths must be >= 1, got {args.paths}")
    out_dir = args.out or cfg.out
    cmd = args.command
    if cmd == "validate":
        return cmd_validate(cfg, out)
    if cmd == "simulate":
        return cmd_simulate(cfg, out_dir, out, args.paths)
    if cmd == "closures":
        return cmd_closures(cfg, out_dir, out, args.paths, args.bounds, args.workers)
    if cmd == "deterministic":
        return cmd_deterministic(cfg, out_dir, out)
    if cmd == "average":
        return cmd_average(cfg, out_dir, out)
    if args.paths is not None:
        cfg = replace(cfg, paths=args.paths)
    return cmd_sweep(cfg, out_dir, out, args.axis, parse_values(args.values), args.paired,
                     args.workers)


def main(argv: Optional[Sequence[str]] = None, out: Optional[TextIO] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    out = sys.stdout if out is None else out
    start = time.perf_counter()
    try:
        code = run(args, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except HypothesisError as exc:
        print(f"hypothesis failure: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except (ModelError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    logger.info("%s finished in %.2fs with exit %d", args.command,
                time.perf_counter() - start, code)
    return code


if __name__ == "__main__":
    sys.exit(main())

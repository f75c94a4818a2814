"""Run configuration: a sectioned INI file with a fixed key set.

Example (abridged from the bundled ``configs/logistic.ini``)::

    [growth]
    kind = logistic
    r0 = 1/9
    K = 9000

    [policy]
    k_plus = 6000
    q = 5000

    [noise]
    sigma = 1/3

    [sim]
    dt = 0.001
    t_max = 500
    seed = 42

Numbers may be written as simple fractions (``1/9``).  Unknown sections or
keys are rejected.  :func:`dump_config` writes the canonical form, which
:func:`parse_config` reads back to an equal :class:`RunConfig`.
"""

from __future__ import annotations

import configparser
import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Dict, Optional, Tuple

from .exceptions import ConfigError, ModelError
from .montecarlo import Scenario
from .rates import ConstantRate, GeneralizedLogistic, GrowthLaw, NoiseSpec, PiecewiseTable, Policy
from .sde import SimConfig

SCHEMA: Dict[str, Tuple[str, ...]] = {
    "growth": ("kind", "r0", "K", "mu", "nu", "r", "table"),
    "policy": ("k_plus", "q"),
    "noise": ("sigma",),
    "sim": ("dt", "t_max", "seed", "crossing_mode", "record_stride", "clamp_floor",
            "base_dt", "max_closures", "n0"),
    "ensemble": ("paths", "burn_in_fraction", "workers"),
    "io": ("out", "csv"),
}
REQUIRED = {
    "policy": ("k_plus", "q"),
    "sim": ("dt", "t_max"),
}
GROWTH_KEYS = {
    "logistic": ("r0", "K"),
    "constant": ("r",),
    "table": ("table",),
}
BUNDLED = ("logistic", "malthusian")


@dataclass(frozen=True)
class RunConfig:
    law: GrowthLaw
    policy: Policy
    noise: NoiseSpec
    sim: SimConfig
    n0: Optional[float] = None
    paths: int = 1000
    burn_in_fraction: float = 0.1
    workers: Optional[int] = None
    out: str = "out"
    csv: bool = True
    table_path: Optional[str] = field(default=None, compare=False)

    @property
    def start(self) -> float:
        return self.policy.k_minus if self.n0 is None else self.n0

    def scenario(self) -> Scenario:
        return Scenario(self.law, self.policy, self.noise, self.sim, self.paths, self.n0)


def _line_of(text: str, section: str, key: Optional[str] = None) -> Optional[int]:
    current = None
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if key is None and current == section:
                return i
        elif current == section and key is not None:
            name = line.split("=", 1)[0].split(":", 1)[0].strip()
            if name == key:
                return i
    return None


class _Reader:
    def __init__(self, text: str, parser: configparser.ConfigParser):
        self.text = text
        self.parser = parser

    def error(self, msg, section, key=None):
        return ConfigError(msg, section=section, key=key, line=_line_of(self.text, section, key))

    def raw(self, section, key):
        if not self.parser.has_option(section, key):
            return None
        value = self.parser.get(section, key).strip()
        return value or None

    def number(self, section, key, default=None, required=False):
        value = self.raw(section, key)
        if value is None:
            if required:
                raise self.error("missing required key", section, key)
            return default
        try:
            out = float(Fraction(value)) if "/" in value else float(value)
        except (ValueError, ZeroDivisionError):
            raise self.error(f"not a number: {value!r}", section, key) from None
        if not math.isfinite(out):
            raise self.error(f"not finite: {value!r}", section, key)
        return out

    def integer(self, section, key, default=None):
        value = self.raw(section, key)
        if value is None:
            return default
        try:
            return int(value)
        except ValueError:
            raise self.error(f"not an integer: {value!r}", section, key) from None

    def boolean(self, section, key, default):
        value = self.raw(section, key)
        if value is None:
            return default
        try:
            return self.parser.getboolean(section, key)
        except ValueError:
            raise self.error(f"not a boolean: {value!r}", section, key) from None


def _read_table(path: Path) -> PiecewiseTable:
    pairs = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                pairs.append((float(row[0]), float(row[1])))
            except (ValueError, IndexError):
                if pairs:
                    raise
                continue  # header row
    return PiecewiseTable.from_pairs(pairs)


def parse_config(text: str, base_dir: Optional[Path] = None) -> RunConfig:
    """Parse and validate INI text; table paths resolve against ``base_dir``."""
    parser = configparser.ConfigParser(interpolation=None, strict=True)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0], line=getattr(exc, "lineno", None)) from None
    rd = _Reader(text, parser)
    for section in parser.sections():
        if section not in SCHEMA:
            raise rd.error("unknown section", section)
        for key in parser.options(section):
            if key not in SCHEMA[section]:
                raise rd.error("unknown key", section, key)
    for section, keys in REQUIRED.items():
        if not parser.has_section(section):
            raise ConfigError(f"missing section [{section}]")
        for key in keys:
            rd.number(section, key, required=True)

    kind = rd.raw("growth", "kind") or "logistic"
    if kind not in GROWTH_KEYS:
        raise rd.error(f"kind must be one of {sorted(GROWTH_KEYS)}", "growth", "kind")
    for key in GROWTH_KEYS[kind]:
        if rd.raw("growth", key) is None:
            raise rd.error(f"missing required key for kind={kind}", "growth", key)
    table_path = None
    try:
        if kind == "logistic":
            law = GeneralizedLogistic(rd.number("growth", "r0"), rd.number("growth", "K"),
                                      rd.number("growth", "mu", 1.0),
                                      rd.number("growth", "nu", 1.0))
        elif kind == "constant":
            law = ConstantRate(rd.number("growth", "r"))
        else:
            table_path = rd.raw("growth", "table")
            path = Path(table_path)
            if not path.is_absolute() and base_dir is not None:
                path = base_dir / path
            try:
                law = _read_table(path)
            except OSError as exc:
                raise rd.error(f"cannot read table: {exc}", "growth", "table") from None
    except ModelError as exc:
        raise rd.error(str(exc), "growth") from None

    try:
        policy = Policy(rd.number("policy", "k_plus"), rd.number("policy", "q"))
    except ModelError as exc:
        raise rd.error(str(exc), "policy") from None
    try:
        policy.check_against(law)
    except ModelError as exc:
        raise rd.error(str(exc), "policy", "k_plus") from None
    try:
        noise = NoiseSpec(rd.number("noise", "sigma", 0.0))
    except ModelError as exc:
        raise rd.error(str(exc), "noise", "sigma") from None

    try:
        sim = SimConfig(
            dt=rd.number("sim", "dt"),
            t_max=rd.number("sim", "t_max"),
            seed=rd.integer("sim", "seed", 0),
            crossing_mode=rd.raw("sim", "crossing_mode") or "interpolate",
            clamp_floor=rd.number("sim", "clamp_floor"),
            record_stride=rd.integer("sim", "record_stride", 1),
            base_dt=rd.number("sim", "base_dt"),
            max_closures=rd.integer("sim", "max_closures"),
        )
    except ModelError as exc:
        raise rd.error(str(exc), "sim") from None
    n0 = rd.number("sim", "n0")
    if n0 is not None and not 0 < n0 <= policy.k_plus:
        raise rd.error(f"n0 must lie in (0, k_plus], got {n0}", "sim", "n0")

    paths = rd.integer("ensemble", "paths", 1000)
    if paths < 1:
        raise rd.error("paths must be >= 1", "ensemble", "paths")
    burn = rd.number("ensemble", "burn_in_fraction", 0.1)
    if not 0 <= burn < 1:
        raise rd.error("burn_in_fraction must lie in [0, 1)", "ensemble", "burn_in_fraction")
    workers = rd.integer("ensemble", "workers")
    if workers is not None and workers < 1:
        raise rd.error("workers must be >= 1", "ensemble", "workers")

    return RunConfig(law, policy, noise, sim, n0, paths, burn, workers,
                     rd.raw("io", "out") or "out", rd.boolean("io", "csv", True),
                     table_path)


def load_config(path) -> RunConfig:
    """Read a config file.  Bare names in :data:`BUNDLED` load the packaged copies."""
    p = Path(path)
    if not p.exists() and str(path) in BUNDLED:
        ref = resources.files("pulsequota") / "configs" / f"{path}.ini"
        return parse_config(ref.read_text(), None)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, p.parent)


def _fmt(x) -> str:
    return repr(float(x))


def dump_config(cfg: RunConfig) -> str:
    """Canonical INI text for ``cfg``."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    law = cfg.law
    if isinstance(law, GeneralizedLogistic):
        growth = {"kind": "logistic", "r0": _fmt(law.r0), "K": _fmt(law.K),
                  "mu": _fmt(law.mu), "nu": _fmt(law.nu)}
    elif isinstance(law, ConstantRate):
        growth = {"kind": "constant", "r": _fmt(law.r)}
    else:
        if cfg.table_path is None:
            raise ConfigError("tabulated law has no table path to serialise")
        growth = {"kind": "table", "table": cfg.table_path}
    parser["growth"] = growth
    parser["policy"] = {"k_plus": _fmt(cfg.policy.k_plus), "q": _fmt(cfg.policy.q)}
    parser["noise"] = {"sigma": _fmt(cfg.noise.sigma)}
    sim = cfg.sim
    sim_block = {"dt": _fmt(sim.dt), "t_max": _fmt(sim.t_max), "seed": str(sim.seed),
                 "crossing_mode": sim.crossing_mode, "record_stride": str(sim.record_stride)}
    if sim.clamp_floor is not None:
        sim_block["clamp_floor"] = _fmt(sim.clamp_floor)
    if sim.base_dt is not None:
        sim_block["base_dt"] = _fmt(sim.base_dt)
    if sim.max_closures is not None:
        sim_block["max_closures"] = str(sim.max_closures)
    if cfg.n0 is not None:
        sim_block["n0"] = _fmt(cfg.n0)
    parser["sim"] = sim_block
    ens = {"paths": str(cfg.paths), "burn_in_fraction": _fmt(cfg.burn_in_fraction)}
    if cfg.workers is not None:
        ens["workers"] = str(cfg.workers)
    parser["ensemble"] = ens
    parser["io"] = {"out": cfg.out, "csv": "true" if cfg.csv else "false"}
    import io
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()

"""Euler-Maruyama simulation of the threshold-harvested stochastic model.

    dN = r(N) N dt + sigma N dB      while N < k_plus
    N  -> k_minus                    when N reaches k_plus

Each path draws from its own random streams, derived from
``(seed, stream_offset, path_id)`` through :class:`numpy.random.SeedSequence`,
so results do not depend on scheduling.  Brownian increments can be built
hierarchically from a coarse grid (``SimConfig.base_dt``) so that runs at
different ``dt`` share the same underlying Brownian path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import List, Optional, Tuple

import numpy as np

from . import _kernel as K
from .exceptions import ModelError
from .rates import GrowthLaw, NoiseSpec, PiecewiseTable, Policy, check_h1

CROSSING_MODES = {
    "grid": K.MODE_GRID,
    "interpolate": K.MODE_INTERPOLATE,
    "bridge": K.MODE_BRIDGE,
}
REFINE_FACTOR = 10
MIN_BLOCK = 16384
MAX_BLOCK = 1 << 16

_TAG_NORMAL = 0
_TAG_UNIFORM = 1


@dataclass(frozen=True)
class SimConfig:
    """Discretisation and bookkeeping knobs for one path.

    ``clamp_floor=None`` resolves to ``1e-9 * k_minus`` at run time.
    ``base_dt`` (default ``dt``) is the coarse Brownian grid; ``dt`` must
    equal ``base_dt / 10**k``.  ``max_closures`` stops a path after that
    many completed closures (``None`` runs to ``t_max``).
    """

    dt: float = 1e-3
    t_max: float = 100.0
    seed: int = 0
    crossing_mode: str = "interpolate"
    clamp_floor: Optional[float] = None
    record_stride: int = 1
    base_dt: Optional[float] = None
    max_closures: Optional[int] = None

    def __post_init__(self):
        if not self.dt > 0 or not math.isfinite(self.dt):
            raise ModelError(f"dt must be positive, got {self.dt}")
        if not self.t_max > self.dt:
            raise ModelError(f"need dt < t_max, got dt={self.dt}, t_max={self.t_max}")
        if not isinstance(self.seed, (int, np.integer)) or self.seed < 0 or self.seed >= 2**64:
            raise ModelError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        if self.crossing_mode not in CROSSING_MODES:
            raise ModelError(f"crossing_mode must be one of {sorted(CROSSING_MODES)}")
        if self.clamp_floor is not None and not self.clamp_floor >= 0:
            raise ModelError(f"clamp_floor must be >= 0, got {self.clamp_floor}")
        if not isinstance(self.record_stride, (int, np.integer)) or self.record_stride < 1:
            raise ModelError(f"record_stride must be an integer >= 1, got {self.record_stride!r}")
        if self.max_closures is not None and self.max_closures < 1:
            raise ModelError(f"max_closures must be >= 1, got {self.max_closures}")
        refinement_levels(self.dt, self.base_dt)

    def floor_for(self, policy: Policy) -> float:
        return 1e-9 * policy.k_minus if self.clamp_floor is None else self.clamp_floor

    def with_(self, **changes) -> "SimConfig":
        return replace(self, **changes)


def refinement_levels(dt: float, base_dt: Optional[float]) -> int:
    """Number of factor-10 refinements from ``base_dt`` down to ``dt``."""
    if base_dt is None or base_dt == dt:
        return 0
    if not base_dt > dt:
        raise ModelError(f"base_dt={base_dt} must be >= dt={dt}")
    levels = round(math.log(base_dt / dt, REFINE_FACTOR))
    if abs(base_dt / REFINE_FACTOR ** levels - dt) > 1e-9 * dt:
        raise ModelError(f"dt={dt} is not base_dt={base_dt} divided by a power of {REFINE_FACTOR}")
    return levels


@dataclass(frozen=True)
class CrossingDecision:
    crossed: bool
    t_cross: float


@dataclass(frozen=True)
class ClosureRecord:
    """One closed season.

    ``open_time`` is the pulse time ending the closure (``None`` when
    censored); ``from_reset`` is False for a first closure that started from
    an initial abundance other than ``k_minus``.
    """

    k: int
    open_time: Optional[float]
    length: float
    censored: bool = False
    from_reset: bool = True


@dataclass
class StochTrajectory:
    t: np.ndarray
    n: np.ndarray
    event: np.ndarray
    increments_consumed: int
    path_id: int
    clamp_activations: int = 0

    @property
    def samples(self) -> List[Tuple[float, float]]:
        return list(zip(self.t.tolist(), self.n.tolist()))


def em_step(law: GrowthLaw, noise: NoiseSpec, n: float, dt: float, db: float,
            clamp_floor: float = 0.0) -> float:
    """``n + r(n) n dt + sigma n db``, floored at ``clamp_floor``."""
    if not n > 0:
        raise ModelError(f"abundance must be positive, got {n}")
    kind, params, tx, ty = law.kernel_args()
    if kind == K.LAW_TABLE and not law.covers(n, n):
        raise ModelError(f"abundance {n} outside table range")
    value, _ = K.em_update(K.RATE_FUNCTIONS[kind], params, tx, ty, noise.sigma, float(n), float(dt),
                           float(db), float(clamp_floor))
    return value


def detect_crossing(n_prev: float, n_next: float, t_prev: float, dt: float,
                    k_plus: float, noise: NoiseSpec, mode: str = "interpolate",
                    u: float = 1.0) -> CrossingDecision:
    """Decide whether the threshold was reached within one step.

    ``bridge`` additionally fires with the Brownian-bridge probability
    ``exp(-2 (k+ - n_prev)(k+ - n_next) / (sigma^2 n_prev^2 dt))`` when the
    end point stays below ``k_plus``; ``u`` is the uniform draw compared
    against it.
    """
    if not n_prev < k_plus:
        raise ModelError("n_prev must lie below k_plus")
    if mode not in CROSSING_MODES:
        raise ModelError(f"crossing_mode must be one of {sorted(CROSSING_MODES)}")
    crossed, off = K.crossing_offset(float(n_prev), float(n_next), float(dt), float(k_plus),
                                     noise.sigma, CROSSING_MODES[mode], float(u))
    return CrossingDecision(bool(crossed), t_prev + off)


class BrownianIncrements:
    """Block generator of ``N(0, dt)`` increments for one path.

    With ``levels > 0`` increments are drawn on the ``base_dt`` grid and
    refined by conditional (bridge) sampling, one independent stream per
    level, so every ``dt`` in the family sees the same coarse path.
    """

    def __init__(self, seed: int, path_id: int, dt: float, base_dt: Optional[float] = None,
                 stream_offset: int = 0, uniforms: bool = False):
        self.levels = refinement_levels(dt, base_dt)
        self.base_dt = dt if self.levels == 0 else base_dt
        key = (int(stream_offset), int(path_id))
        self._normal = [
            np.random.Generator(np.random.SFC64(
                np.random.SeedSequence(int(seed), spawn_key=key + (_TAG_NORMAL, lvl))))
            for lvl in range(self.levels + 1)
        ]
        self._uniform = None
        if uniforms:
            self._uniform = np.random.Generator(np.random.SFC64(
                np.random.SeedSequence(int(seed), spawn_key=key + (_TAG_UNIFORM,))))
        self._size = MIN_BLOCK

    def next_block(self) -> Tuple[np.ndarray, Optional[np.ndarray]]:
        fan = REFINE_FACTOR ** self.levels
        coarse = max(1, self._size // fan)
        h = self.base_dt
        incs = self._normal[0].standard_normal(coarse)
        incs *= math.sqrt(h)
        for lvl in range(1, self.levels + 1):
            h /= REFINE_FACTOR
            z = self._normal[lvl].standard_normal((incs.size, REFINE_FACTOR))
            z *= math.sqrt(h)
            z += ((incs - z.sum(axis=1)) / REFINE_FACTOR)[:, None]
            incs = z.ravel()
        unis = None
        if self._uniform is not None:
            unis = self._uniform.random(incs.size)
        self._size = min(self._size * 2, MAX_BLOCK)
        return incs, unis


@dataclass
class PathRun:
    """Raw outcome of one simulated path (internal currency of the ensemble)."""

    path_id: int
    event_times: List[float]
    lengths: List[float]
    first_from_reset: bool
    censored_length: Optional[float]
    final_n: float
    final_t: float
    clamps: int
    consumed: int
    env_steps: int = 0
    env_violations: int = 0
    integral: float = 0.0
    t: Optional[np.ndarray] = None
    n: Optional[np.ndarray] = None
    event: Optional[np.ndarray] = None

    def closures(self) -> List[ClosureRecord]:
        out = [ClosureRecord(k, tau, length, False, k > 0 or self.first_from_reset)
               for k, (tau, length) in enumerate(zip(self.event_times, self.lengths))]
        if self.censored_length is not None:
            k = len(out)
            out.append(ClosureRecord(k, None, self.censored_length, True,
                                     k > 0 or self.first_from_reset))
        return out


def run_path(law: GrowthLaw, policy: Optional[Policy], noise: NoiseSpec, config: SimConfig,
             n0: float, path_id: int, *, stream_offset: int = 0, record: bool = False,
             envelope: Optional[Tuple[float, float]] = None,
             avg_from: float = math.inf) -> PathRun:
    """Drive the compiled stepper over as many increment blocks as needed.

    ``policy=None`` disables harvesting.  ``envelope=(alpha, beta)`` tracks
    the shared-increment GBM sandwich up to the first crossing.
    """
    kind, params, tx, ty = law.kernel_args()
    if policy is None:
        k_plus, k_minus, floor = math.inf, n0, config.floor_for(Policy(2.0 * n0, n0))
    else:
        k_plus, k_minus, floor = policy.k_plus, policy.k_minus, config.floor_for(policy)
    mode = CROSSING_MODES[config.crossing_mode]
    stride = config.record_stride if record else 0
    source = BrownianIncrements(config.seed, path_id, config.dt, config.base_dt,
                                stream_offset, uniforms=(mode == K.MODE_BRIDGE))
    dummy_u = np.zeros(0)
    fs = np.zeros(K.F_SIZE)
    ist = np.zeros(K.I_SIZE, dtype=np.int64)
    ts, ns, es = [np.array([0.0])], [np.array([float(n0)])], [np.array([0], dtype=np.int8)]
    events, lengths = [], []
    first_from_reset = n0 == k_minus
    n_start = float(n0)
    if n0 >= k_plus:
        es[0][0] = 1
        ts.append(np.array([0.0])), ns.append(np.array([k_minus])), es.append(np.array([0], np.int8))
        n_start, first_from_reset = k_minus, True
    fs[K.F_N] = n_start
    if envelope is not None:
        alpha, beta = envelope
        fs[K.F_ENV_LO] = fs[K.F_ENV_HI] = n_start
        ist[K.I_ENV_ACTIVE] = 1
        lo_drift, hi_drift = alpha - noise.half_variance, beta - noise.half_variance
    else:
        lo_drift = hi_drift = 0.0
    max_closures = config.max_closures or 0

    while not ist[K.I_DONE]:
        incs, unis = source.next_block()
        cap = 3 * incs.size + 4 if stride else 0
        rec_t, rec_n, rec_e = np.empty(cap), np.empty(cap), np.empty(cap, dtype=np.int8)
        ev_t, ev_len = np.empty(incs.size), np.empty(incs.size)
        K.advance(K.RATE_FUNCTIONS[kind], fs, ist, incs,
                  unis if unis is not None else dummy_u, config.dt, params, tx, ty, noise.sigma, k_plus, k_minus, mode, floor,
                  config.t_max, max_closures, stride, rec_t, rec_n, rec_e, ev_t, ev_len,
                  avg_from, lo_drift, hi_drift)
        n_ev = ist[K.I_N_EVENTS]
        events.extend(ev_t[:n_ev].tolist())
        lengths.extend(ev_len[:n_ev].tolist())
        if stride:
            m = ist[K.I_N_RECORDS]
            ts.append(rec_t[:m]), ns.append(rec_n[:m]), es.append(rec_e[:m])

    final_t = fs[K.F_ANCHOR] + ist[K.I_STEPS_SINCE_ANCHOR] * config.dt
    censored = None
    if policy is not None and not (max_closures and len(events) >= max_closures):
        last = events[-1] if events else 0.0
        if config.t_max - last > 0:
            censored = config.t_max - last
    run = PathRun(path_id, events, lengths, first_from_reset, censored,
                  float(fs[K.F_N]), float(final_t), int(ist[K.I_CLAMPS]),
                  int(ist[K.I_CONSUMED]), int(ist[K.I_ENV_STEPS]),
                  int(ist[K.I_ENV_VIOLATIONS]), float(fs[K.F_INTEGRAL]))
    if record:
        run.t, run.n, run.event = np.concatenate(ts), np.concatenate(ns), np.concatenate(es)
    return run


def _check_path_inputs(law, policy, n0):
    if not 0 < n0 <= policy.k_plus:
        raise ModelError(f"n0 must lie in (0, k_plus], got {n0}")
    if not hasattr(law, "kernel_args"):
        raise TypeError(f"unsupported growth law {type(law).__name__}")
    policy.check_against(law)
    if isinstance(law, PiecewiseTable) and not check_h1(law).holds:
        raise ModelError("tabulated law must satisfy H1 for simulation")


def simulate_path(law: GrowthLaw, policy: Policy, noise: NoiseSpec, config: SimConfig,
                  n0: float, path_id: int = 0, *,
                  stream_offset: int = 0) -> Tuple[StochTrajectory, List[ClosureRecord]]:
    """Simulate one harvested path from ``n0`` up to ``config.t_max``.

    Returns the recorded trajectory (thinned by ``record_stride``; pulse rows
    are always kept) and the closure records, the last one censored if the
    horizon cut it off.
    """
    _check_path_inputs(law, policy, n0)
    run = run_path(law, policy, noise, config, n0, path_id,
                   stream_offset=stream_offset, record=True)
    traj = StochTrajectory(run.t, run.n, run.event, run.consumed, path_id, run.clamps)
    return traj, run.closures()

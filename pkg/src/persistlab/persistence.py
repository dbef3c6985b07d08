"""Numerical checks of the boundary-repeller argument.

The faces of the orthant are removed in the order origin face, prey axis,
``S = 0`` face, disease-free face; :func:`theorem_conditions` runs the
corresponding checks in that order. Nothing here is a proof: tail minima
estimate a liminf and sampled inequalities are evidence only.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cycle import (
    LimitCycle,
    RegimeMismatch,
    SupcycleVerdict,
    check_supcycle,
    find_limit_cycle,
    r0_bar as cycle_r0_bar,
    solve_return,
)
from .equilibria import (
    InteriorEquilibriumAbsent,
    Regime,
    classify_regime,
    dissipativity_bound,
    r0_star as eq_r0_star,
)
from .models import (
    CounterexampleParams,
    ModelParams,
    counterexample_field,
    full_field,
    phi,
    rhs_full,
)
from .ode import (
    SolverSettings,
    Trajectory,
    find_section_crossings,
    integrate,
    integrate_with_quadrature,
)

__all__ = [
    "SamplingExhausted",
    "LyapunovCheck",
    "FaceCheck",
    "PersistenceReport",
    "OrbitRecord",
    "BoundaryDistanceStats",
    "CounterexampleResult",
    "ORBIT_SETTINGS",
    "lyapunov_V_check",
    "boundary_flow_check",
    "theorem_conditions",
    "random_interior_seeds",
    "persistence_experiment",
    "counterexample_run",
    "counterexample_cycle_integral",
]

log = logging.getLogger(__name__)

ORBIT_SETTINGS = SolverSettings(rtol=1e-9, atol=1e-13, h_init=1e-3, h_max=0.5, nonneg=True)
EXTINCTION_FLOOR = 1e-6
TAIL_FRACTION = 0.25


class SamplingExhausted(RuntimeError):
    pass


@dataclass(frozen=True)
class LyapunovCheck:
    passed: bool
    worst_margin: float  # smallest dS/dt seen
    n_samples: int
    n_drawn: int
    k: float


@dataclass(frozen=True)
class FaceCheck:
    face: str
    passed: bool
    worst: float
    n_samples: int


@dataclass(frozen=True)
class PersistenceReport:
    em_holds: bool
    r0_star: float | None
    r0_bar: float | None
    supcycle: SupcycleVerdict | None
    theorem_satisfied: bool
    k_used: float
    regime: Regime
    chain: tuple[tuple[str, bool, str], ...] = ()
    period: float | None = None


@dataclass(frozen=True)
class OrbitRecord:
    index: int
    initial: np.ndarray
    tail_min: np.ndarray
    final: np.ndarray
    extinct: np.ndarray


@dataclass(frozen=True)
class BoundaryDistanceStats:
    """Per-orbit tail minima of ``N``, ``S``, ``I``.

    The tail minimum estimates the liminf of the distance to each face; it is
    not a certificate.
    """

    records: list[OrbitRecord]
    t_end: float
    tail_start: float
    floor: float

    @property
    def tail_min(self) -> np.ndarray:
        return np.array([r.tail_min for r in self.records])

    @property
    def extinct(self) -> np.ndarray:
        return np.array([r.extinct for r in self.records])

    @property
    def eta(self) -> float:
        """Smallest tail minimum over all orbits and components."""
        return float(self.tail_min.min())


@dataclass(frozen=True)
class CounterexampleResult:
    trajectory: Trajectory
    z_min_time: float
    z_min: float
    z_end: float


def _simplex_k(p: ModelParams, k: float | None) -> float:
    return dissipativity_bound(p) + 1.0 if k is None else float(k)


def lyapunov_V_check(
    p: ModelParams,
    n_samples: int = 10_000,
    seed: int = 0,
    *,
    k: float | None = None,
    boundary_fraction: float = 0.1,
    budget: int | None = None,
) -> LyapunovCheck:
    """Sample ``V \\ M3`` inside the simplex and check ``dS/dt > 0``.

    ``V`` is ``{0 < S <= N I / ((h + N)(m + beta I))}``. A fraction of the
    samples sits exactly on the upper edge of ``V``, where the margin is
    thinnest.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    k = _simplex_k(p, k)
    budget = budget or 100 * n_samples
    rng = np.random.default_rng(seed)
    n_edge = int(round(boundary_fraction * n_samples))
    kept: list[np.ndarray] = []
    n_have = 0
    drawn = 0
    while n_have < n_samples:
        if drawn >= budget:
            raise SamplingExhausted(f"only {n_have} of {n_samples} samples after {drawn} draws at k={k:g}")
        batch = min(2 * (n_samples - n_have) + 16, budget - drawn)
        drawn += batch
        x = k * (1.0 - rng.random(batch))
        z = k * (1.0 - rng.random(batch))
        y_edge = x * z / ((p.h + x) * (p.m + p.beta * z))
        room = k - x - z
        ok = (room > 0) & (y_edge <= room)
        x, z, y_edge = x[ok], z[ok], y_edge[ok]
        u = 1.0 - rng.random(x.size)
        y = y_edge * u
        on_edge = max(0, n_edge - n_have)
        y[:on_edge] = y_edge[:on_edge]
        ok = y > 0
        pts = np.stack([x[ok], y[ok], z[ok]])
        kept.append(pts)
        n_have += pts.shape[1]
    pts = np.concatenate(kept, axis=1)[:, :n_samples]
    dS = rhs_full(p, pts)[1]
    worst = float(dS.min())
    return LyapunovCheck(bool(worst > 0), worst, n_samples, drawn, k)


def boundary_flow_check(p: ModelParams, n_samples: int = 10_000, seed: int = 0, *, k: float | None = None) -> dict[str, FaceCheck]:
    """Sampled versions of the three face conditions.

    ``N=0``: ``d(S+I)/dt <= -m (S+I)``; ``S=0`` with ``N, I > 0``:
    ``dS/dt > 0``; ``I=0``: ``dI/dt == 0`` exactly.
    """
    k = _simplex_k(p, k)
    rng = np.random.default_rng(seed)

    def simplex2(n):
        a, b = rng.random(n), rng.random(n)
        flip = a + b > 1
        a[flip], b[flip] = 1 - a[flip], 1 - b[flip]
        return k * a, k * b

    n = n_samples
    s, i = simplex2(n)
    f = rhs_full(p, np.stack([np.zeros(n), s, i]))
    excess = f[1] + f[2] + p.m * (s + i)
    face_x = FaceCheck("N=0", bool(np.all(excess <= 0) and np.all(f[0] == 0)), float(excess.max()), n)

    nn, ii = simplex2(n)
    keep = (nn > 0) & (ii > 0)
    f = rhs_full(p, np.stack([nn[keep], np.zeros(keep.sum()), ii[keep]]))
    face_y = FaceCheck("S=0", bool(np.all(f[1] > 0)), float(f[1].min()), int(keep.sum()))

    nn, ss = simplex2(n)
    f = rhs_full(p, np.stack([nn, ss, np.zeros(n)]))
    face_z = FaceCheck("I=0", bool(np.all(f[2] == 0)), float(np.abs(f[2]).max()), n)
    return {"N=0": face_x, "S=0": face_y, "I=0": face_z}


def theorem_conditions(
    p: ModelParams,
    *,
    n_phase: int = 256,
    horizon: float = 10.0,
    cycle: LimitCycle | None = None,
) -> PersistenceReport:
    """Evaluate the hypotheses of the persistence theorem at ``p``.

    Checks follow the removal order of the boundary pieces; the last step
    needs both ``R0* > 1`` and the cycle condition.
    """
    regime = classify_regime(p)
    em = regime.tag == "LimitCycle" and not regime.non_hyperbolic
    chain: list[tuple[str, bool, str]] = []
    chain.append(("M1 origin", p.r > 0, f"unstable eigenvalue r={p.r:g} transverse to N=0"))
    lam2 = 1.0 / (1.0 + p.h) - p.m
    chain.append(("M2 logistic point", lam2 > 0, f"eigenvalue 1/(1+h)-m={lam2:.6g}"))
    chain.append(("M3 face S=0", True, "dS/dt = N I/(h+N) > 0 off the axes"))
    try:
        r0s = eq_r0_star(p)
    except InteriorEquilibriumAbsent:
        r0s = None
    chain.append(("M3* disease-free equilibrium", r0s is not None and r0s > 1, f"R0*={r0s}"))

    rbar = verdict = period = None
    if em:
        cyc = cycle if cycle is not None else find_limit_cycle(p)
        period = cyc.period
        rbar = cycle_r0_bar(p, cyc)
        verdict = check_supcycle(p, cyc, n_phase=n_phase, horizon=horizon)
        chain.append(("M4 limit cycle", verdict.holds, f"margin={verdict.margin:.6g}, tau={verdict.tau}"))
    else:
        chain.append(("M4 limit cycle", False, f"no cycle: regime {regime.tag}"))
    ok = bool(em and r0s is not None and r0s > 1 and verdict is not None and verdict.holds)
    return PersistenceReport(em, r0s, rbar, verdict, ok, _simplex_k(p, None), regime, tuple(chain), period)


def random_interior_seeds(n: int, seed: int = 0, k: float = np.inf, lo: float = 0.05, hi: float = 0.9) -> np.ndarray:
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        x = lo + (hi - lo) * rng.random(3)
        if x.sum() <= k:
            out.append(x)
    return np.array(out)


def _orbit(args) -> OrbitRecord:
    idx, p, y0, t_end, tail_start, floor, settings = args
    traj = integrate(full_field(p), y0, (0.0, t_end), settings)
    tail = traj.states[traj.times >= tail_start]
    final = traj.y_end
    return OrbitRecord(idx, np.asarray(y0, dtype=float), tail.min(axis=0), final, final < floor)


def persistence_experiment(
    p: ModelParams,
    initial_states,
    t_end: float = 2000.0,
    tail_fraction: float = TAIL_FRACTION,
    floor: float = EXTINCTION_FLOOR,
    settings: SolverSettings | None = None,
    jobs: int = 1,
) -> BoundaryDistanceStats:
    if not 0 < tail_fraction < 1:
        raise ValueError("tail_fraction must lie in (0, 1)")
    if floor <= 0:
        raise ValueError("floor must be positive")
    settings = settings or ORBIT_SETTINGS
    tail_start = t_end * (1.0 - tail_fraction)
    tasks = [(i, p, np.asarray(y0, dtype=float), t_end, tail_start, floor, settings) for i, y0 in enumerate(initial_states)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            records = list(ex.map(_orbit, tasks))
    else:
        records = [_orbit(t) for t in tasks]
    records.sort(key=lambda r: r.index)
    return BoundaryDistanceStats(records, t_end, tail_start, floor)


COUNTER_SETTINGS = SolverSettings(rtol=1e-10, atol=1e-14, h_init=1e-3, h_max=0.1)


def counterexample_run(
    c: CounterexampleParams,
    y0=(0.1, 0.1, 15.0),
    t_end: float = 150.0,
    settings: SolverSettings | None = None,
    substeps: int = 8,
) -> CounterexampleResult:
    settings = settings or COUNTER_SETTINGS
    traj = integrate(counterexample_field(c), y0, (0.0, t_end), settings)
    frac = np.arange(substeps) / substeps
    grid = np.append((traj.times[:-1, None] + np.diff(traj.times)[:, None] * frac).ravel(), traj.times[-1])
    z = traj(grid)[:, 2]
    i = int(np.argmin(z))
    return CounterexampleResult(traj, float(grid[i]), float(z[i]), float(traj.y_end[2]))


def counterexample_cycle_integral(c: CounterexampleParams, burn_in: float = 300.0) -> tuple[float, float]:
    """Period of the planar van der Pol cycle and the integral of ``delta*phi(x^2+y^2)`` over it.

    A positive integral is the analogue of the cycle condition for the
    ``z`` direction.
    """
    settings = COUNTER_SETTINGS
    planar = lambda v: counterexample_field(c)(np.array([v[0], v[1], 0.0]))[:2]
    y = integrate(planar, [0.1, 0.1], (0.0, burn_in), settings).y_end
    section = lambda v: v[1]

    def pmap(x0):
        ev = find_section_crossings(planar, [x0, 0.0], (0.0, 100.0), section, "-", settings, max_events=1)
        return float(ev[0].state[0]), ev[0].t_cross

    ev = find_section_crossings(planar, y, (0.0, 100.0), section, "-", settings, max_events=2)
    x0, period = solve_return(pmap, float(ev[0].state[0]), float(ev[1].state[0]))
    traj = integrate_with_quadrature(
        planar, lambda v: c.delta * phi(v[0] ** 2 + v[1] ** 2), [x0, 0.0], (0.0, period), settings
    )
    return float(period), float(traj.quad[-1])

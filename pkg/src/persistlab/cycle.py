"""The disease-free limit cycle and the cycle-based invasion markers.

The cycle is located on the section ``N = N*`` crossed with ``dN/dt > 0``.
On that line ``dS/dt = 0``, so the anchor is the point of the cycle where
``S`` is smallest. The return map in ``S`` is solved by a damped secant
iteration after relaxing onto the attractor.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .equilibria import classify_regime, disease_free_equilibrium
from .models import ModelParams, disease_free_field
from .ode import (
    SolverSettings,
    Trajectory,
    find_section_crossings,
    integrate,
    integrate_with_quadrature,
)

__all__ = [
    "RegimeMismatch",
    "CycleNotConverged",
    "CycleInvalid",
    "LimitCycle",
    "SupcycleVerdict",
    "CYCLE_SETTINGS",
    "find_limit_cycle",
    "return_map",
    "solve_return",
    "r0_bar",
    "transverse_floquet",
    "check_supcycle",
]

log = logging.getLogger(__name__)

CYCLE_SETTINGS = SolverSettings(rtol=1e-12, atol=1e-14, h_init=1e-3, h_max=0.25)
SUPCYCLE_SETTINGS = SolverSettings(rtol=1e-10, atol=1e-13, h_init=1e-3, h_max=0.25)
BURN_IN = 50.0
RETURN_TOL = 1e-10


class RegimeMismatch(ValueError):
    """The parameters are outside the limit-cycle regime."""


class CycleNotConverged(RuntimeError):
    pass


class CycleInvalid(ValueError):
    pass


@dataclass(frozen=True)
class LimitCycle:
    """One period of the disease-free orbit.

    ``trajectory`` starts at ``anchor`` at time 0 and carries the running
    integral of ``S`` in its quadrature channel; ``samples`` are ``n_phase``
    equally time-spaced states starting at the anchor.
    """

    r: float
    h: float
    m: float
    anchor: np.ndarray
    period: float
    samples: np.ndarray
    s_mean: float
    closure_residual: float
    multiplier: float
    trajectory: Trajectory

    def matches(self, p: ModelParams) -> bool:
        return (self.r, self.h, self.m) == (p.r, p.h, p.m)

    def state_at(self, t) -> np.ndarray:
        """Dense state at time ``t`` modulo the period."""
        return self.trajectory(np.mod(t, self.period))

    @property
    def sample_times(self) -> np.ndarray:
        return np.arange(len(self.samples)) * self.period / len(self.samples)


@dataclass(frozen=True)
class SupcycleVerdict:
    holds: bool
    tau: float | None
    margin: float
    horizon: float
    n_phase: int


def return_map(p: ModelParams, s0: float, settings: SolverSettings = CYCLE_SETTINGS, t_max: float = 1e3):
    """Next upward crossing of ``N = N*`` from ``(N*, s0)``: ``(S, return time)``."""
    n_star, _ = disease_free_equilibrium(p)
    ev = find_section_crossings(
        disease_free_field(p), [n_star, s0], (0.0, t_max),
        lambda y: y[0] - n_star, "+", settings, max_events=1,
    )
    if not ev:
        raise CycleNotConverged(f"no return to the section within t={t_max:g}")
    return float(ev[0].state[1]), ev[0].t_cross


def _relax(p: ModelParams, seed, settings: SolverSettings) -> list[float]:
    n_star, _ = disease_free_equilibrium(p)
    field_ = disease_free_field(p)
    y = integrate(field_, seed, (0.0, BURN_IN), settings).y_end
    ev = find_section_crossings(
        field_, y, (BURN_IN, BURN_IN + 1e3), lambda v: v[0] - n_star, "+", settings, max_events=2,
    )
    if len(ev) < 2:
        raise CycleNotConverged("burn-in did not settle onto a periodic orbit")
    return [float(e.state[1]) for e in ev]


def solve_return(pmap, s_a: float, s_b: float, tol: float = RETURN_TOL, max_iter: int = 40) -> tuple[float, float]:
    """Damped secant for a fixed point of a 1-D return map.

    ``pmap(s)`` returns ``(next_s, return_time)``; ``s_b`` must equal
    ``pmap(s_a)[0]`` (two consecutive returns of a relaxed orbit).
    """
    x0, f0 = s_a, s_b - s_a
    x1 = s_b
    p1, t1 = pmap(x1)
    f1 = p1 - x1
    for _ in range(max_iter):
        if abs(f1) <= tol:
            return x1, t1
        step = f1 if f1 == f0 else f1 * (x1 - x0) / (f1 - f0)
        # never move more than a quarter of the current value
        cap = 0.25 * max(abs(x1), tol)
        step = float(np.clip(step, -cap, cap))
        x0, f0 = x1, f1
        x1 = x1 - step
        p1, t1 = pmap(x1)
        f1 = p1 - x1
    raise CycleNotConverged(f"return-map residual {abs(f1):.3g} after {max_iter} secant steps")


def find_limit_cycle(
    p: ModelParams,
    settings: SolverSettings | None = None,
    *,
    seed=None,
    n_phase: int = 256,
) -> LimitCycle:
    regime = classify_regime(p)
    if regime.tag != "LimitCycle" or regime.non_hyperbolic:
        raise RegimeMismatch(
            f"m={p.m:g} is not below (1-h)/(1+h)={regime.lower:g}: no stable disease-free cycle"
        )
    settings = settings or CYCLE_SETTINGS
    n_star, s_star = disease_free_equilibrium(p)
    if seed is None:
        seed = (n_star, 0.5 * s_star)
    seed = np.asarray(seed, dtype=float)[:2]
    if not np.all(seed > 0):
        raise ValueError("seed must lie in the open quadrant")

    s_a, s_b = _relax(p, seed, settings)
    s0, period = solve_return(lambda s: return_map(p, s, settings), s_a, s_b)

    ds = 1e-6 * s0
    slope = (return_map(p, s0 + ds, settings)[0] - return_map(p, s0 - ds, settings)[0]) / (2 * ds)
    if not abs(slope) < 1.0:
        raise CycleNotConverged(f"return-map slope {slope:.4g} does not certify a stable cycle")

    anchor = np.array([n_star, s0])
    traj = integrate_with_quadrature(disease_free_field(p), lambda y: y[1], anchor, (0.0, period), settings)
    closure = float(np.linalg.norm(traj.y_end - anchor))
    samples = traj(np.arange(n_phase) * period / n_phase)
    s_mean = float(traj.quad[-1]) / period
    log.debug("cycle: T=%.12g S0=%.12g mean S=%.12g slope=%.4g", period, s0, s_mean, slope)
    return LimitCycle(p.r, p.h, p.m, anchor, float(period), samples, s_mean, closure, float(slope), traj)


def _require(p: ModelParams, cycle: LimitCycle):
    if not cycle.matches(p):
        raise CycleInvalid(
            f"cycle computed for (r,h,m)=({cycle.r:g},{cycle.h:g},{cycle.m:g}), "
            f"not ({p.r:g},{p.h:g},{p.m:g})"
        )


def r0_bar(p: ModelParams, cycle: LimitCycle) -> float:
    """Cycle-averaged reproduction number ``beta * mean(S) / (m + mu)``."""
    _require(p, cycle)
    return p.beta * cycle.s_mean / (p.m + p.mu)


def transverse_floquet(p: ModelParams, cycle: LimitCycle, settings: SolverSettings | None = None) -> float:
    """Integral of ``beta S - (m + mu)`` over one period.

    This is the log-growth per period of a small infected population riding
    the cycle.
    """
    _require(p, cycle)
    settings = settings or CYCLE_SETTINGS
    c = p.m + p.mu
    traj = integrate_with_quadrature(
        disease_free_field(p), lambda y: p.beta * y[1] - c, cycle.anchor, (0.0, cycle.period), settings
    )
    return float(traj.quad[-1])


def _first_positive(traj: Trajectory, t_lo: float, t_hi: float, tol: float = 1e-13) -> float:
    """Bisection for the first instant where the phase-minimum integral turns positive."""
    def lowest(t):
        return float(np.min(traj.quad_at(t)))

    for _ in range(200):
        if t_hi - t_lo <= tol * max(1.0, t_hi):
            break
        mid = 0.5 * (t_lo + t_hi)
        if lowest(mid) > 0:
            t_hi = mid
        else:
            t_lo = mid
    return t_hi


def _fine_grid(times: np.ndarray, sub: int) -> np.ndarray:
    frac = np.arange(sub) / sub
    inner = (times[:-1, None] + np.diff(times)[:, None] * frac).ravel()
    return np.append(inner, times[-1])


def check_supcycle(
    p: ModelParams,
    cycle: LimitCycle,
    n_phase: int = 256,
    horizon: float = 10.0,
    settings: SolverSettings | None = None,
    *,
    max_horizon: float = 200.0,
    substeps: int = 4,
) -> SupcycleVerdict:
    """Test positivity of the running integral of ``beta S - (m+mu)`` from every phase.

    ``horizon`` and ``max_horizon`` are in periods. All phases are integrated
    as one stacked system. If every phase turns positive but never all at
    once within ``horizon``, the run is extended one horizon at a time up to
    ``max_horizon`` to locate ``tau``; the verdict reports the horizon used.
    """
    _require(p, cycle)
    if n_phase < 2:
        raise ValueError("n_phase must be >= 2")
    if cycle.closure_residual > 1e-6 * (1 + np.linalg.norm(cycle.anchor)):
        raise CycleInvalid(f"closure residual {cycle.closure_residual:.3g} too large")
    settings = settings or SUPCYCLE_SETTINGS
    c = p.m + p.mu
    starts = cycle.state_at(np.arange(n_phase) * cycle.period / n_phase)
    y = starts.T.reshape(-1)
    field_ = disease_free_field(p, n_phase)

    def psi(v):
        return p.beta * v[n_phase:] - c

    t0, offset = 0.0, np.zeros(n_phase)
    sup = np.full(n_phase, -np.inf)
    tau = None
    span = horizon * cycle.period
    while True:
        traj = integrate_with_quadrature(field_, psi, y, (t0, t0 + span), settings)
        grid = _fine_grid(traj.times, substeps)
        vals = traj.quad_at(grid) + offset
        sup = np.maximum(sup, vals.max(axis=0))
        if tau is None:
            low = vals.min(axis=1)
            pos = np.flatnonzero(low > 0)
            if pos.size:
                i = pos[0]
                if i == 0 or (grid[i - 1] == 0.0 and np.all(psi(y) > 0)):
                    tau = float(grid[max(i - 1, 0)])
                else:
                    shifted = _Shifted(traj, offset)
                    tau = _first_positive(shifted, float(grid[i - 1]), float(grid[i]))
        t_end = t0 + span
        margin = float(sup.min())
        holds = margin > 0
        if tau is not None or not holds or t_end >= max_horizon * cycle.period * (1 - 1e-12):
            break
        y = traj.states[-1]
        offset = offset + traj.quad[-1]
        t0 = t_end
    return SupcycleVerdict(bool(holds), tau, margin, t_end, n_phase)


class _Shifted:
    """Quadrature view of a continuation chunk, offset by earlier integrals."""

    def __init__(self, traj: Trajectory, offset: np.ndarray):
        self.traj = traj
        self.offset = offset

    def quad_at(self, t):
        return self.traj.quad_at(t) + self.offset

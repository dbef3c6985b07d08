"""Adaptive Dormand-Prince 5(4) integration with dense output.

The stepper carries an optional quadrature channel: the integrand ``g`` is
appended to the state as ``q' = g(y)`` so the running integral shares the
error control and the quartic interpolant of the state itself.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Literal, Sequence

import numpy as np

__all__ = [
    "SolverSettings",
    "Trajectory",
    "SectionEvent",
    "IntegrationError",
    "StepBudgetExceeded",
    "StepUnderflow",
    "NonFiniteState",
    "RootRefinementFailed",
    "integrate",
    "integrate_with_quadrature",
    "find_section_crossings",
]

Field = Callable[[float, np.ndarray], np.ndarray]
Direction = Literal["+", "-", "both"]


class IntegrationError(RuntimeError):
    """Base class for solver failures."""


class StepBudgetExceeded(IntegrationError):
    pass


class StepUnderflow(IntegrationError):
    pass


class NonFiniteState(IntegrationError):
    pass


class RootRefinementFailed(IntegrationError):
    pass


# Dormand & Prince (1980) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# difference between 5th and embedded 4th order weights
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
# Hairer's continuous extension (dopri5 contd5)
_D = np.array([
    -12715105075 / 11282082432,
    0.0,
    87487479700 / 32700410799,
    -10690763975 / 1880347072,
    701980252875 / 199316789632,
    -1453857185 / 822651844,
    69997945 / 29380423,
])

_SAFETY = 0.9
_FAC_MIN = 0.2
_FAC_MAX = 5.0
_PI_BETA = 0.04
_PI_ALPHA = 0.2 - 0.75 * _PI_BETA


@dataclass(frozen=True)
class SolverSettings:
    """Tolerances and step limits.

    With ``adaptive=False`` every step has length ``h_init`` (the last one is
    shortened to land on the end of the span) and no error control is done.
    ``nonneg`` turns on the orthant guard for the first ``n`` components.
    """

    rtol: float = 1e-9
    atol: float = 1e-12
    h_init: float = 1e-3
    h_max: float = 1.0
    max_steps: int = 1_000_000
    nonneg: bool = False
    adaptive: bool = True

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("rtol and atol must be positive")
        if not (0 < self.h_init <= self.h_max):
            raise ValueError("need 0 < h_init <= h_max")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")


@dataclass(frozen=True)
class Trajectory:
    """Accepted steps of one integration.

    ``segments[i]`` holds the five interpolation vectors of step
    ``times[i] -> times[i+1]``; each covers the state and, when present, the
    quadrature channel, which is stored after the ``dim`` state components.
    """

    times: np.ndarray
    states: np.ndarray
    segments: np.ndarray
    quad: np.ndarray | None = None
    dim: int = field(default=0)

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def t1(self) -> float:
        return float(self.times[-1])

    @property
    def y_end(self) -> np.ndarray:
        return self.states[-1]

    def _locate(self, t: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self.times, t, side="right") - 1
        return np.clip(idx, 0, len(self.times) - 2)

    def _dense(self, t, cols: slice) -> np.ndarray:
        t_arr = np.asarray(t, dtype=float)
        scalar = t_arr.ndim == 0
        t_arr = np.atleast_1d(t_arr)
        lo, hi = self.times[0], self.times[-1]
        span = hi - lo
        if np.any(t_arr < lo - 1e-12 * max(1.0, abs(span))) or np.any(
            t_arr > hi + 1e-12 * max(1.0, abs(span))
        ):
            raise ValueError("evaluation time outside trajectory span")
        if len(self.times) == 1:
            out = np.repeat(self._full_row(0)[None, cols], len(t_arr), axis=0)
            return out[0] if scalar else out
        idx = self._locate(t_arr)
        h = self.times[idx + 1] - self.times[idx]
        theta = ((t_arr - self.times[idx]) / h)[:, None]
        r = self.segments[idx][:, :, cols]
        th1 = 1.0 - theta
        out = r[:, 0] + theta * (r[:, 1] + th1 * (r[:, 2] + theta * (r[:, 3] + th1 * r[:, 4])))
        return out[0] if scalar else out

    def _full_row(self, i: int) -> np.ndarray:
        if self.quad is None:
            return self.states[i]
        q = np.atleast_1d(self.quad[i])
        return np.concatenate([self.states[i], q])

    def __call__(self, t):
        """Dense state at time(s) ``t``."""
        return self._dense(t, slice(0, self.dim))

    def quad_at(self, t):
        """Dense running integral at time(s) ``t``."""
        if self.quad is None:
            raise ValueError("trajectory has no quadrature channel")
        out = self._dense(t, slice(self.dim, None))
        if self.quad.ndim == 1:
            out = out[..., 0]
        return out


@dataclass(frozen=True)
class SectionEvent:
    t_cross: float
    state: np.ndarray
    direction: int


def _rms(x: np.ndarray) -> float:
    return float(np.sqrt(np.mean(x * x)))


class _Stepper:
    """One integration run; ``on_step`` may stop it early by returning True."""

    def __init__(self, fun: Field, y0, t0: float, t1: float, settings: SolverSettings, n_guard: int):
        self.fun = fun
        self.s = settings
        self.t0 = float(t0)
        self.t1 = float(t1)
        if not self.t1 > self.t0:
            raise ValueError("t_span must satisfy t1 > t0")
        self.y0 = np.array(y0, dtype=float)
        if self.y0.ndim != 1:
            raise ValueError("state must be one-dimensional")
        if not np.all(np.isfinite(self.y0)):
            raise NonFiniteState("initial state is not finite")
        self.n_guard = n_guard if settings.nonneg else 0

    def _clamp(self, t: float, y: np.ndarray, f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        g = self.n_guard
        if not g:
            return y, f
        small = (np.abs(y[:g]) < self.s.atol) & (f[:g] <= 0.0) & (y[:g] != 0.0)
        if not np.any(small):
            return y, f
        y = y.copy()
        y[:g][small] = 0.0
        return y, np.asarray(self.fun(t, y), dtype=float)

    def run(self, on_step=None):
        s = self.s
        fun = self.fun
        t, y = self.t0, self.y0
        f = np.asarray(fun(t, y), dtype=float)
        y, f = self._clamp(t, y, f)
        times, states, segs = [t], [y], []
        h = min(s.h_init, s.h_max, self.t1 - self.t0)
        err_prev = 1e-4
        rejected = False
        n_steps = 0
        k = np.empty((7, y.size))
        while t < self.t1:
            if n_steps >= s.max_steps:
                raise StepBudgetExceeded(f"step budget {s.max_steps} exhausted at t={t:.6g}")
            last = False
            if t + h >= self.t1 or (not s.adaptive and t + h * (1 + 1e-12) >= self.t1):
                h = self.t1 - t
                last = True
            if h <= 16 * np.finfo(float).eps * max(1.0, abs(t)):
                if not np.all(np.isfinite(y)):
                    raise NonFiniteState(f"non-finite state at t={t:.6g}")
                raise StepUnderflow(f"step size underflow at t={t:.6g}")
            k[0] = f
            for i in range(1, 7):
                yi = y + h * (np.dot(_A[i], k[:i]))
                k[i] = fun(t + _C[i] * h, yi)
            y_new = yi  # stage 7 abscissa is the 5th order solution (FSAL)
            f_new = k[6].copy()
            n_steps += 1
            if not (np.all(np.isfinite(y_new)) and np.all(np.isfinite(f_new))):
                h *= _FAC_MIN
                rejected = True
                last = False
                continue
            if s.adaptive:
                scale = s.atol + s.rtol * np.maximum(np.abs(y), np.abs(y_new))
                err = _rms(h * np.dot(_E, k) / scale)
                if err > 1.0:
                    fac = max(_FAC_MIN, _SAFETY * err ** -_PI_ALPHA)
                    h *= min(1.0, fac)
                    rejected = True
                    continue
            if self.n_guard and np.any(y_new[: self.n_guard] < -s.atol):
                h *= 0.5
                rejected = True
                continue
            t_new = self.t1 if last else t + h
            y_new, f_new = self._clamp(t_new, y_new, f_new)
            dy = y_new - y
            bspl = h * f - dy
            seg = np.stack([
                y,
                dy,
                bspl,
                dy - h * f_new - bspl,
                h * (np.dot(_D[:6], k[:6]) + _D[6] * f_new),
            ])
            times.append(t_new)
            states.append(y_new)
            segs.append(seg)
            if s.adaptive:
                err = max(err, 1e-10)
                fac = _SAFETY * err ** -_PI_ALPHA * err_prev ** _PI_BETA
                fac = min(_FAC_MAX, max(_FAC_MIN, fac))
                if rejected:
                    fac = min(1.0, fac)
                err_prev = err
                h = min(h * fac, s.h_max)
            rejected = False
            t, y, f = t_new, y_new, f_new
            if on_step is not None and on_step(len(times) - 2, times, states, segs):
                break
        segments = np.array(segs) if segs else np.empty((0, 5, y.size))
        return np.array(times), np.array(states), segments


def _autonomous(rhs) -> Field:
    return lambda t, y: np.asarray(rhs(y), dtype=float)


def _wrap(rhs, autonomous: bool) -> Field:
    return _autonomous(rhs) if autonomous else rhs


def integrate(
    rhs,
    y0,
    t_span: Sequence[float],
    settings: SolverSettings | None = None,
    *,
    autonomous: bool = True,
) -> Trajectory:
    """Integrate ``y' = rhs(y)`` over ``t_span``.

    Set ``autonomous=False`` to pass a field with signature ``rhs(t, y)``.
    """
    settings = settings or SolverSettings()
    fun = _wrap(rhs, autonomous)
    y0 = np.asarray(y0, dtype=float)
    st = _Stepper(fun, y0, t_span[0], t_span[1], settings, n_guard=y0.size)
    times, states, segs = st.run()
    return Trajectory(times, states, segs, None, dim=y0.size)


def _augment(rhs: Field, g, n: int) -> Field:
    def fun(t, yq):
        y = yq[:n]
        return np.concatenate([np.asarray(rhs(t, y), dtype=float), np.atleast_1d(g(y))])

    return fun


def integrate_with_quadrature(
    rhs,
    g,
    y0,
    t_span: Sequence[float],
    settings: SolverSettings | None = None,
    *,
    autonomous: bool = True,
) -> Trajectory:
    """Integrate and accumulate ``quad(t) = int_{t0}^t g(y(s)) ds``.

    ``g`` may return a scalar or a vector; ``quad`` then has shape ``(n,)``
    or ``(n, k)`` respectively.
    """
    settings = settings or SolverSettings()
    fun = _wrap(rhs, autonomous)
    y0 = np.asarray(y0, dtype=float)
    n = y0.size
    g0 = np.asarray(g(y0), dtype=float)
    scalar = g0.ndim == 0
    yq0 = np.concatenate([y0, np.zeros(g0.size)])
    st = _Stepper(_augment(fun, g, n), yq0, t_span[0], t_span[1], settings, n_guard=n)
    times, full, segs = st.run()
    quad = full[:, n:]
    if scalar:
        quad = quad[:, 0]
    return Trajectory(times, full[:, :n], segs, quad, dim=n)


def _refine_root(func, a: float, b: float, fa: float, fb: float, tol: float, max_iter: int = 80) -> float:
    """Illinois false position safeguarded by bisection on a bracket."""
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    side = 0
    for it in range(max_iter):
        if it % 3 == 2:
            c = 0.5 * (a + b)
        else:
            c = (a * fb - b * fa) / (fb - fa)
            if not (min(a, b) < c < max(a, b)):
                c = 0.5 * (a + b)
        fc = func(c)
        if abs(fc) <= tol or b - a <= 4 * np.finfo(float).eps * max(1.0, abs(c)):
            return c
        if np.sign(fc) == np.sign(fb):
            b, fb = c, fc
            if side == -1:
                fa *= 0.5
            side = -1
        else:
            a, fa = c, fc
            if side == 1:
                fb *= 0.5
            side = 1
    raise RootRefinementFailed(f"no root to {tol:g} in [{a:.17g}, {b:.17g}] after {max_iter} iterations")


def _matches(s0: float, s1: float, direction: Direction) -> int:
    if direction in ("+", "both") and s0 < 0.0 <= s1:
        return 1
    if direction in ("-", "both") and s0 > 0.0 >= s1:
        return -1
    return 0


def find_section_crossings(
    rhs,
    y0,
    t_span: Sequence[float],
    section: Callable[[np.ndarray], float],
    direction: Direction = "both",
    settings: SolverSettings | None = None,
    *,
    max_events: int | None = None,
    root_tol: float = 1e-10,
    autonomous: bool = True,
    return_trajectory: bool = False,
):
    """Locate sign changes of ``section`` along the dense solution.

    A crossing exactly at the starting point is not reported. With
    ``max_events`` the integration stops after that many crossings.
    """
    if direction not in ("+", "-", "both"):
        raise ValueError(f"bad direction {direction!r}")
    settings = settings or SolverSettings()
    fun = _wrap(rhs, autonomous)
    y0 = np.asarray(y0, dtype=float)
    n = y0.size
    st = _Stepper(fun, y0, t_span[0], t_span[1], settings, n_guard=n)
    events: list[SectionEvent] = []
    svals = [float(section(y0))]

    def interp(seg, ta, tb, t):
        th = (t - ta) / (tb - ta)
        th1 = 1.0 - th
        return seg[0] + th * (seg[1] + th1 * (seg[2] + th * (seg[3] + th1 * seg[4])))

    def on_step(i, times, states, segs):
        s1 = float(section(states[-1]))
        s0 = svals[-1]
        svals.append(s1)
        sign = _matches(s0, s1, direction)
        if sign:
            ta, tb, seg = times[-2], times[-1], segs[-1]
            scale = max(1.0, abs(s0), abs(s1))
            tc = _refine_root(lambda t: float(section(interp(seg, ta, tb, t))), ta, tb, s0, s1, root_tol * scale)
            events.append(SectionEvent(float(tc), interp(seg, ta, tb, tc), sign))
        return max_events is not None and len(events) >= max_events

    times, states, segs = st.run(on_step)
    if return_trajectory:
        return events, Trajectory(times, states, segs, None, dim=n)
    return events

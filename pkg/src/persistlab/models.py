"""Vector fields for the diseased-predator system and the van der Pol counterexample.

State ordering is ``(N, S, I)``: prey, susceptible predators, infected
predators. All right-hand sides broadcast over trailing axes, so a stacked
state of shape ``(3, k)`` evaluates ``k`` points at once.
"""
from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

__all__ = [
    "ModelParams",
    "CounterexampleParams",
    "DEFAULT_PARAMS",
    "rhs_full",
    "rhs_disease_free",
    "jacobian_full",
    "phi",
    "rhs_counterexample",
    "full_field",
    "disease_free_field",
    "counterexample_field",
]


@dataclass(frozen=True)
class ModelParams:
    """Positive constants of the model.

    r: prey logistic growth rate
    h: half-saturation constant of the Holling II response
    m: predator decay rate
    mu: extra mortality of infected predators
    beta: disease transmissibility
    """

    r: float
    h: float
    m: float
    mu: float
    beta: float

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{f.name} must be positive and finite, got {v!r}")

    def replace(self, **changes) -> "ModelParams":
        vals = {f.name: getattr(self, f.name) for f in fields(self)}
        vals.update(changes)
        return ModelParams(**vals)


# reference parameter set; also the RunConfig defaults
DEFAULT_PARAMS = ModelParams(r=2.0, h=0.3, m=0.3, mu=0.5, beta=1.3)


@dataclass(frozen=True)
class CounterexampleParams:
    eps: float = 0.1
    delta: float = 0.1

    def __post_init__(self):
        if not (self.eps > 0 and self.delta > 0):
            raise ValueError("eps and delta must be positive")


def rhs_full(p: ModelParams, x) -> np.ndarray:
    N, S, I = x[0], x[1], x[2]
    pred = N * (S + I) / (p.h + N)
    infect = p.beta * S * I
    return np.array([
        p.r * N * (1.0 - N) - pred,
        pred - p.m * S - infect,
        infect - (p.m + p.mu) * I,
    ])


def rhs_disease_free(p: ModelParams, x) -> np.ndarray:
    N, S = x[0], x[1]
    return np.array([
        N * (p.r * (1.0 - N) - S / (p.h + N)),
        S * (N / (p.h + N) - p.m),
    ])


def jacobian_full(p: ModelParams, x) -> np.ndarray:
    N, S, I = (float(v) for v in x[:3])
    hn = p.h + N
    a = p.h * (S + I) / hn**2
    b = N / hn
    return np.array([
        [p.r * (1.0 - 2.0 * N) - a, -b, -b],
        [a, b - p.m - p.beta * I, b - p.beta * S],
        [0.0, p.beta * I, p.beta * S - (p.m + p.mu)],
    ])


def phi(s):
    """Clamp ``s - 2`` to ``[-1, 0.5]``."""
    return np.maximum(np.minimum(s - 2.0, 0.5), -1.0)


def rhs_counterexample(c: CounterexampleParams, x) -> np.ndarray:
    X, Y, Z = x[0], x[1], x[2]
    return np.array([
        Y - c.eps * (X**3 / 3.0 - X),
        -X,
        c.delta * phi(X * X + Y * Y) * Z,
    ])


# Closures in integrator form: ``field(y)`` for a flat state vector. The
# optional ``n`` stacks that many independent copies (component-major).

def _stacked(rhs, params, dim: int, n: int | None):
    if n is None:
        return lambda y: rhs(params, y)

    def f(y):
        return rhs(params, y.reshape(dim, n)).reshape(-1)

    return f


def full_field(p: ModelParams, n: int | None = None):
    return _stacked(rhs_full, p, 3, n)


def disease_free_field(p: ModelParams, n: int | None = None):
    return _stacked(rhs_disease_free, p, 2, n)


def counterexample_field(c: CounterexampleParams):
    return lambda y: rhs_counterexample(c, y)

"""Boundary equilibria, their spectra, and the scalar threshold markers."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .models import ModelParams, jacobian_full, rhs_full

__all__ = [
    "InteriorEquilibriumAbsent",
    "NotAnEquilibrium",
    "DegenerateFormula",
    "Regime",
    "EquilibriumReport",
    "disease_free_equilibrium",
    "boundary_equilibria",
    "classify_regime",
    "jacobian_origin",
    "jacobian_logistic",
    "jacobian_disease_free",
    "analyze_equilibrium",
    "stable_manifold_tangents",
    "tangent_logistic",
    "tangent_disease_free",
    "r0_star",
    "dissipativity_bound",
]

log = logging.getLogger(__name__)

RegimeTag = Literal["LogisticStable", "InteriorEquilibriumStable", "LimitCycle"]
Classification = Literal["saddle", "stable", "unstable", "non-hyperbolic"]

THRESHOLD_TOL = 1e-12
EQUILIBRIUM_TOL = 1e-8


class InteriorEquilibriumAbsent(ValueError):
    """(N*, S*) is not in the open quadrant: m >= 1/(1+h)."""


class NotAnEquilibrium(ValueError):
    pass


class DegenerateFormula(ArithmeticError):
    """A closed-form eigenvector divides by zero at these parameters."""


@dataclass(frozen=True)
class Regime:
    tag: RegimeTag
    lower: float  # (1-h)/(1+h)
    upper: float  # 1/(1+h)
    non_hyperbolic: bool = False

    @property
    def thresholds(self) -> tuple[float, float]:
        return self.lower, self.upper


@dataclass(frozen=True)
class EquilibriumReport:
    point: np.ndarray
    jacobian: np.ndarray
    eigenvalues: np.ndarray
    classification: Classification
    tangent_directions: list[tuple[float, np.ndarray]] = field(default_factory=list)
    label: str = ""


def _has_interior(p: ModelParams) -> bool:
    return p.m < 1.0 / (1.0 + p.h)


def disease_free_equilibrium(p: ModelParams) -> tuple[float, float]:
    """Return ``(N*, S*)``; raises when it leaves the open quadrant."""
    if not _has_interior(p):
        raise InteriorEquilibriumAbsent(
            f"m={p.m:g} >= 1/(1+h)={1 / (1 + p.h):g}: no disease-free coexistence equilibrium"
        )
    n_star = p.m * p.h / (1.0 - p.m)
    s_star = p.r * (1.0 - n_star) * (p.h + n_star)
    return n_star, s_star


def boundary_equilibria(p: ModelParams) -> list[np.ndarray]:
    """Origin, logistic point and, when it exists, ``(N*, S*, 0)``."""
    pts = [np.zeros(3), np.array([1.0, 0.0, 0.0])]
    if _has_interior(p):
        n_star, s_star = disease_free_equilibrium(p)
        pts.append(np.array([n_star, s_star, 0.0]))
    return pts


def classify_regime(p: ModelParams) -> Regime:
    lower = (1.0 - p.h) / (1.0 + p.h)
    upper = 1.0 / (1.0 + p.h)
    edge = abs(p.m - lower) < THRESHOLD_TOL or abs(p.m - upper) < THRESHOLD_TOL
    if p.m >= upper:
        tag = "LogisticStable"
    elif p.m >= lower:
        tag = "InteriorEquilibriumStable"
    else:
        tag = "LimitCycle"
    return Regime(tag, lower, upper, edge)


def jacobian_origin(p: ModelParams) -> np.ndarray:
    return np.diag([p.r, -p.m, -(p.m + p.mu)])


def jacobian_logistic(p: ModelParams) -> np.ndarray:
    c = 1.0 / (p.h + 1.0)
    return np.array([
        [-p.r, -c, -c],
        [0.0, c - p.m, c],
        [0.0, 0.0, -(p.m + p.mu)],
    ])


def jacobian_disease_free(p: ModelParams) -> np.ndarray:
    _, s_star = disease_free_equilibrium(p)
    m, h, r = p.m, p.h, p.r
    return np.array([
        [r * m * (1.0 - (1.0 + m) / (1.0 - m) * h), -m, -m],
        [r * (1.0 - m * (1.0 + h)), 0.0, m - p.beta * s_star],
        [0.0, 0.0, p.beta * s_star - (m + p.mu)],
    ])


def _order(eigs) -> np.ndarray:
    eigs = np.asarray(eigs, dtype=complex)
    idx = sorted(range(len(eigs)), key=lambda i: (-eigs[i].real, eigs[i].imag))
    return eigs[idx]


def _planar_pair(trace: float, det: float) -> tuple[complex, complex]:
    disc = trace * trace - 4.0 * det
    if disc >= 0:
        sq = np.sqrt(disc)
        # avoid cancellation in the smaller root
        big = 0.5 * (trace + np.copysign(sq, trace)) if trace != 0 else 0.5 * sq
        small = det / big if big != 0 else -big
        return complex(big), complex(small)
    sq = np.sqrt(-disc)
    return complex(0.5 * trace, 0.5 * sq), complex(0.5 * trace, -0.5 * sq)


def _which(p: ModelParams, x: np.ndarray) -> str:
    for label, pt in zip(("origin", "logistic", "disease_free"), boundary_equilibria(p)):
        if np.allclose(x, pt, rtol=0, atol=1e-12):
            return label
    return "other"


def _closed_form_eigenvalues(p: ModelParams, label: str, J: np.ndarray) -> np.ndarray:
    if label == "origin":
        return _order([p.r, -p.m, -(p.m + p.mu)])
    if label == "logistic":
        return _order([-p.r, 1.0 / (p.h + 1.0) - p.m, -(p.m + p.mu)])
    if label == "disease_free":
        m, h, r = p.m, p.h, p.r
        trace = r * m * (1.0 - (1.0 + m) * h / (1.0 - m))
        det = m * r * (1.0 - m * (1.0 + h))
        _, s_star = disease_free_equilibrium(p)
        l1, l2 = _planar_pair(trace, det)
        return _order([l1, l2, p.beta * s_star - (m + p.mu)])
    # generic point: roots of the characteristic polynomial
    c2 = -np.trace(J)
    c1 = 0.5 * (np.trace(J) ** 2 - np.trace(J @ J))
    c0 = -np.linalg.det(J)
    return _order(np.roots([1.0, c2, c1, c0]))


def _classify(eigs: np.ndarray, scale: float) -> Classification:
    re = eigs.real
    if np.any(np.abs(re) <= THRESHOLD_TOL * max(1.0, scale)):
        return "non-hyperbolic"
    if np.all(re < 0):
        return "stable"
    if np.all(re > 0):
        return "unstable"
    return "saddle"


def _numeric_eigvec(J: np.ndarray, lam: complex) -> np.ndarray:
    _, _, vh = np.linalg.svd(J - lam * np.eye(len(J)))
    v = vh[-1].conj()
    k = np.argmax(np.abs(v))
    v = v / v[k]
    return v.real if abs(complex(lam).imag) == 0 else v


def tangent_logistic(p: ModelParams) -> np.ndarray:
    """Eigenvector of J(1,0,0) for eigenvalue -(m+mu), third component 1."""
    denom = p.m + p.mu - p.r
    if denom == 0.0:
        raise DegenerateFormula("m + mu - r = 0")
    c = 1.0 + p.mu * (p.h + 1.0)
    return np.array([p.mu / (c * denom), -1.0 / c, 1.0])


def tangent_disease_free(p: ModelParams) -> np.ndarray:
    """Eigenvector of J(N*,S*,0) for the transverse eigenvalue, third component 1.

    With ``f = (l1+l2) l3 - (l1 l2 + l3^2)`` the vector is
    ``(-mu m / f, -1 - mu (l1+l2-l3) / f, 1)``.
    """
    m, h, r = p.m, p.h, p.r
    _, s_star = disease_free_equilibrium(p)
    trace = r * m * (1.0 - (1.0 + m) * h / (1.0 - m))
    det = m * r * (1.0 - m * (1.0 + h))
    l3 = p.beta * s_star - (m + p.mu)
    f = trace * l3 - (det + l3 * l3)
    if f == 0.0 or l3 == 0.0:
        raise DegenerateFormula("f(l1, l2, l3) = 0")
    return np.array([-p.mu * m / f, -1.0 - p.mu * (trace - l3) / f, 1.0])


def _directions(p: ModelParams, label: str, J: np.ndarray, eigs: np.ndarray) -> list[tuple[float, np.ndarray]]:
    out = []
    for lam in eigs:
        if abs(lam.imag) > 0:
            continue
        lam = float(lam.real)
        v = None
        try:
            if label == "origin":
                v = np.zeros(3)
                v[int(np.argmin(np.abs(np.diag(J) - lam)))] = 1.0
            elif label == "logistic":
                if lam == -p.r:
                    v = np.array([1.0, 0.0, 0.0])
                elif lam == -(p.m + p.mu):
                    v = tangent_logistic(p)
                else:
                    v = np.array([-1.0 / ((p.h + 1.0) * (lam + p.r)), 1.0, 0.0])
            elif label == "disease_free":
                if lam == J[2, 2]:
                    v = tangent_disease_free(p)
                else:
                    v = np.array([lam, J[1, 0], 0.0])
        except (DegenerateFormula, ZeroDivisionError, FloatingPointError) as exc:
            log.info("closed-form tangent unavailable at %s (%s); using numeric eigenvector", label, exc)
            v = None
        if v is None or not np.all(np.isfinite(v)) or _residual(J, lam, v) > 1e-8 * np.linalg.norm(J):
            v = _numeric_eigvec(J, lam)
        out.append((lam, v))
    return out


def _residual(J: np.ndarray, lam: complex, v: np.ndarray) -> float:
    return float(np.linalg.norm(J @ v - lam * v) / np.linalg.norm(v))


def analyze_equilibrium(p: ModelParams, point) -> EquilibriumReport:
    x = np.asarray(point, dtype=float)
    res = np.linalg.norm(rhs_full(p, x))
    if res > EQUILIBRIUM_TOL:
        raise NotAnEquilibrium(f"|rhs| = {res:.3g} at {x.tolist()}")
    label = _which(p, x)
    J = jacobian_full(p, x)
    eigs = _closed_form_eigenvalues(p, label, J)
    cls = _classify(eigs, float(np.max(np.abs(eigs))))
    return EquilibriumReport(x, J, eigs, cls, _directions(p, label, J, eigs), label)


def stable_manifold_tangents(p: ModelParams, point) -> list[np.ndarray]:
    """Spanning vectors of the tangent space to the stable manifold.

    Complex stable pairs contribute the real and imaginary parts of their
    eigenvector.
    """
    rep = analyze_equilibrium(p, point)
    out = [v for lam, v in rep.tangent_directions if lam < 0]
    for lam in rep.eigenvalues:
        if lam.imag > 0 and lam.real < 0:
            v = _numeric_eigvec(rep.jacobian, lam)
            out += [v.real, v.imag]
    return out


def r0_star(p: ModelParams) -> float:
    _, s_star = disease_free_equilibrium(p)
    return p.beta * s_star / (p.m + p.mu)


def dissipativity_bound(p: ModelParams) -> float:
    """Smallest ``k`` past which the flux through ``N+S+I=k`` points inward."""
    return 1.0 + p.r / (4.0 * p.m)

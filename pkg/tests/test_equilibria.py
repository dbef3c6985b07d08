import numpy as np
import pytest

from persistlab.equilibria import (
    InteriorEquilibriumAbsent,
    NotAnEquilibrium,
    analyze_equilibrium,
    boundary_equilibria,
    classify_regime,
    disease_free_equilibrium,
    dissipativity_bound,
    jacobian_disease_free,
    jacobian_logistic,
    jacobian_origin,
    r0_star,
    stable_manifold_tangents,
    tangent_logistic,
)
from persistlab.models import DEFAULT_PARAMS, ModelParams, jacobian_full, rhs_full

P = DEFAULT_PARAMS


def random_params(rng, m_hi=0.95):
    r, h, m, mu, beta = rng.uniform([0.5, 0.05, 0.05, 0.05, 0.2], [4.0, 1.0, m_hi, 2.0, 5.0])
    return ModelParams(r, h, m, mu, beta)


def far_from_thresholds(p, gap=1e-3):
    return abs(p.m - (1 - p.h) / (1 + p.h)) > gap and abs(p.m - 1 / (1 + p.h)) > gap


def planar_pair(rep):
    # drop the transverse eigenvalue J[2,2]
    eigs = list(rep.eigenvalues)
    k = int(np.argmin([abs(e - rep.jacobian[2, 2]) for e in eigs]))
    del eigs[k]
    return np.array(eigs)


def test_disease_free_values():
    n, s = disease_free_equilibrium(P)
    assert n == pytest.approx(0.3 * 0.3 / 0.7, abs=1e-12)
    assert n == pytest.approx(0.1285714, abs=1e-7)
    assert s == pytest.approx(0.7469388, abs=1e-7)


def test_boundary_equilibria_counts():
    assert len(boundary_equilibria(P)) == 3
    pts = boundary_equilibria(ModelParams(2, 0.3, 0.9, 0.5, 1.3))
    assert len(pts) == 2
    with pytest.raises(InteriorEquilibriumAbsent):
        disease_free_equilibrium(ModelParams(2, 0.3, 0.9, 0.5, 1.3))


def test_boundary_equilibria_are_equilibria():
    rng = np.random.default_rng(5)
    for _ in range(50):
        p = random_params(rng)
        for x in boundary_equilibria(p):
            assert np.max(np.abs(rhs_full(p, x))) < 1e-12
            assert np.all(x >= 0)


@pytest.mark.parametrize("m,tag", [(0.3, "LimitCycle"), (0.6, "InteriorEquilibriumStable"), (0.8, "LogisticStable")])
def test_regime_examples(m, tag):
    reg = classify_regime(P.replace(m=m))
    assert reg.tag == tag
    assert reg.lower == pytest.approx(0.7 / 1.3)
    assert reg.upper == pytest.approx(1 / 1.3)
    assert not reg.non_hyperbolic


def test_regime_threshold_flag():
    reg = classify_regime(P.replace(m=0.7 / 1.3))
    assert reg.non_hyperbolic


def test_closed_form_jacobians_match_general():
    rng = np.random.default_rng(9)
    for _ in range(100):
        p = random_params(rng, m_hi=0.5)
        pts = boundary_equilibria(p)
        for Jc, x in zip((jacobian_origin(p), jacobian_logistic(p), jacobian_disease_free(p)), pts):
            np.testing.assert_allclose(Jc, jacobian_full(p, x), rtol=1e-12, atol=1e-12)


def test_origin_report():
    rep = analyze_equilibrium(P, [0, 0, 0])
    np.testing.assert_array_equal(rep.eigenvalues, [2.0, -0.3, -0.8])
    assert rep.classification == "saddle"


def test_logistic_report():
    rep = analyze_equilibrium(P, [1, 0, 0])
    assert rep.eigenvalues[0].real == pytest.approx(1 / 1.3 - 0.3, abs=1e-15)
    assert rep.eigenvalues[0].real == pytest.approx(0.4692, abs=1e-4)
    assert rep.classification == "saddle"


def test_disease_free_report():
    n, s = disease_free_equilibrium(P)
    rep = analyze_equilibrium(P, [n, s, 0])
    l3 = P.beta * s - (P.m + P.mu)
    assert l3 == pytest.approx(0.1710, abs=1e-4)
    pair = planar_pair(rep)
    trace = P.r * P.m * (1 - (1 + P.m) * P.h / (1 - P.m))
    det = P.m * P.r * (1 - P.m * (1 + P.h))
    assert trace == pytest.approx(0.2657, abs=1e-4)
    assert det == pytest.approx(0.366, abs=1e-3)
    assert abs(pair.sum() - trace) < 1e-9
    assert abs(np.prod(pair) - det) < 1e-9
    assert rep.classification == "unstable"


def test_not_an_equilibrium():
    with pytest.raises(NotAnEquilibrium):
        analyze_equilibrium(P, [0.5, 0.2, 0.1])


def test_eigenvalue_ordering():
    n, s = disease_free_equilibrium(P)
    eigs = analyze_equilibrium(P, [n, s, 0]).eigenvalues
    keys = [(-e.real, e.imag) for e in eigs]
    assert keys == sorted(keys)


def test_eigen_invariants_random():
    rng = np.random.default_rng(21)
    for _ in range(100):
        p = random_params(rng)
        for x in boundary_equilibria(p):
            rep = analyze_equilibrium(p, x)
            J = rep.jacobian
            nJ = np.linalg.norm(J)
            ref = np.sort_complex(np.linalg.eigvals(J))
            np.testing.assert_allclose(np.sort_complex(rep.eigenvalues), ref, atol=1e-9 * max(1, nJ))
            coeffs = np.poly(J)
            for lam in rep.eigenvalues:
                assert abs(np.polyval(coeffs, lam)) <= 1e-9 * nJ ** 3
            for lam, v in rep.tangent_directions:
                assert np.linalg.norm(J @ v - lam * v) <= 1e-8 * nJ * np.linalg.norm(v)


def test_sign_link_random():
    rng = np.random.default_rng(4)
    for _ in range(100):
        p = random_params(rng, m_hi=0.7)
        if p.m >= 1 / (1 + p.h):
            continue
        n, s = disease_free_equilibrium(p)
        l3 = analyze_equilibrium(p, [n, s, 0]).jacobian[2, 2]
        assert np.sign(l3) == np.sign(r0_star(p) - 1)


def test_regime_eigenvalue_agreement():
    rng = np.random.default_rng(17)
    n = 0
    while n < 100:
        p = random_params(rng)
        if not far_from_thresholds(p):
            continue
        n += 1
        tag = classify_regime(p).tag
        log_pair = planar_pair(analyze_equilibrium(p, [1, 0, 0])).real
        assert (tag == "LogisticStable") == bool(np.all(log_pair < 0))
        if tag == "LogisticStable":
            continue
        ns, ss = disease_free_equilibrium(p)
        pair = planar_pair(analyze_equilibrium(p, [ns, ss, 0])).real
        assert (tag == "InteriorEquilibriumStable") == bool(np.all(pair < 0))
        assert (tag == "LimitCycle") == bool(np.all(pair > 0))


def test_tangent_logistic_example():
    v = tangent_logistic(P)
    np.testing.assert_allclose(v, [0.5 / (1.65 * (0.8 - 2)), -1 / 1.65, 1], rtol=1e-14)
    np.testing.assert_allclose(v, [-0.2525, -0.6061, 1], atol=1e-4)
    J = jacobian_logistic(P)
    assert np.linalg.norm(J @ v + 0.8 * v) < 1e-12


def test_tangent_logistic_degenerate_fallback():
    p = ModelParams(r=0.8, h=0.3, m=0.3, mu=0.5, beta=1.3)
    rep = analyze_equilibrium(p, [1, 0, 0])
    J = rep.jacobian
    for lam, v in rep.tangent_directions:
        assert np.all(np.isfinite(v))
        assert np.linalg.norm(J @ v - lam * v) <= 1e-8 * np.linalg.norm(J) * np.linalg.norm(v)


def test_no_transverse_tangent_when_r0_above_one():
    n, s = disease_free_equilibrium(P)
    tangents = stable_manifold_tangents(P, [n, s, 0])
    assert tangents == []


def test_transverse_tangent_when_r0_below_one():
    p = P.replace(beta=0.5)
    assert r0_star(p) < 1
    n, s = disease_free_equilibrium(p)
    tangents = stable_manifold_tangents(p, [n, s, 0])
    J = jacobian_full(p, [n, s, 0])
    l3 = J[2, 2]
    assert len(tangents) == 1
    v = tangents[0]
    assert v[2] == 1.0
    assert np.linalg.norm(J @ v - l3 * v) <= 1e-8 * np.linalg.norm(J)


def test_stable_tangents_span_origin():
    ts = stable_manifold_tangents(P, [0, 0, 0])
    assert len(ts) == 2
    assert np.linalg.matrix_rank(np.array(ts)) == 2


def test_r0_star():
    assert r0_star(P) == pytest.approx(1.3 * 0.7469388 / 0.8, abs=1e-6)
    assert r0_star(P) == pytest.approx(1.21378, abs=1e-5)
    _, s = disease_free_equilibrium(P)
    assert r0_star(P.replace(beta=0.8 / s)) == pytest.approx(1.0, abs=1e-14)
    assert r0_star(P.replace(beta=2.6)) == pytest.approx(2 * r0_star(P), rel=1e-14)


def test_dissipativity_bound():
    assert dissipativity_bound(P) == pytest.approx(1 + 2 / 1.2, abs=1e-14)
    assert dissipativity_bound(P.replace(r=1e-12)) == pytest.approx(1.0)
    k = dissipativity_bound(P) + 1
    w = np.random.default_rng(8).dirichlet(np.ones(3), size=10_000) * k
    assert np.all(rhs_full(P, w.T).sum(axis=0) < 0)

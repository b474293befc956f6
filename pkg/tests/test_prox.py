import numpy as np
import pytest
from scipy.optimize import minimize, minimize_scalar

from dynpat.prox import (
    prox_flow_quad,
    prox_nonneg_quad,
    prox_quad_conjugate,
    prox_tv_dual_project,
    prox_tv_shrink,
)


def test_nonneg_quad_examples():
    for a in (0.0, 0.3, 5.0):
        assert prox_nonneg_quad(a, 1.0, 1.0) == 1.0
    assert prox_nonneg_quad(1.0, -5.0, -1.0) == 0.0
    obj = lambda x: 1.0 * 0.5 * (x - 2.0) ** 2 + 0.5 * (x - 0.0) ** 2
    grid = np.linspace(0, 3, 3_000_001)
    assert abs(prox_nonneg_quad(1.0, 2.0, 0.0) - grid[np.argmin(obj(grid))]) < 1e-6


def test_flow_quad_examples():
    xt = np.array([0.3, -0.7])
    assert np.allclose(prox_flow_quad(2.0, 1.0, np.zeros(2), xt), xt)
    assert np.allclose(prox_flow_quad(2.0, 0.0, np.array([1.0, 2.0]), np.zeros(2)), 0)
    c = np.array([1.0, 2.0])
    f = lambda x: 0.5 * (1.0 + c @ x) ** 2 + 0.5 * x @ x
    ref = minimize(f, np.zeros(2), method="BFGS", options={"gtol": 1e-12}).x
    assert np.allclose(prox_flow_quad(1.0, 1.0, c, np.zeros(2)), ref, atol=1e-8)


def test_flow_quad_solves_system(rng):
    for d in (2, 3):
        c, xt = rng.standard_normal(d), rng.standard_normal(d)
        a, z = rng.random() * 3, rng.standard_normal()
        x = prox_flow_quad(a, z, c, xt)
        assert np.allclose((np.eye(d) + a * np.outer(c, c)) @ x, xt - a * c * z)


def test_tv_shrink_examples():
    assert np.allclose(prox_tv_shrink(2.0, np.array([3.0, 4.0])), [1.8, 2.4])
    assert np.all(prox_tv_shrink(5.0, np.array([3.0, 4.0])) == 0)
    assert np.all(prox_tv_shrink(1.0, np.zeros(2)) == 0)


def test_tv_dual_project_examples(rng):
    assert np.allclose(prox_tv_dual_project(1.0, np.array([3.0, 4.0])), [0.6, 0.8])
    y = np.array([0.3, 0.4])
    assert np.array_equal(prox_tv_dual_project(1.0, y), y)
    # Moreau: prox of the conjugate with step nu equals y - nu prox_{a/nu |.|}(y/nu)
    for _ in range(20):
        y = rng.standard_normal(2) * 3
        a, nu = rng.random() + 0.1, rng.random() + 0.1
        lhs = prox_tv_dual_project(a, y)
        rhs = y - nu * prox_tv_shrink(a / nu, y / nu)
        assert np.allclose(lhs, rhs, atol=1e-12)


def test_quad_conjugate_examples(rng):
    assert prox_quad_conjugate(2.0, 1.0, 3.0) == pytest.approx(2.0)
    assert prox_quad_conjugate(2.0, 1.0, 0.0) == 0.0
    g, nu, yt = 1.7, 0.4, -2.3
    ref = minimize_scalar(lambda y: nu * y ** 2 / (2 * g) + 0.5 * (y - yt) ** 2).x
    assert prox_quad_conjugate(g, nu, yt) == pytest.approx(ref, abs=1e-8)
    assert np.all(prox_quad_conjugate(0.0, 1.0, np.ones(3)) == 0)


def test_firmly_nonexpansive(rng):
    maps = [
        lambda x: prox_nonneg_quad(0.7, 0.2, x),
        lambda x: prox_flow_quad(0.9, 0.5, np.array([1.0, -2.0])[:, None], x, axis=0),
        lambda x: prox_tv_shrink(0.5, x, axis=0),
        lambda x: prox_tv_dual_project(0.5, x, axis=0),
        lambda x: prox_quad_conjugate(1.3, 0.6, x),
    ]
    for f in maps:
        for _ in range(50):
            a, b = rng.standard_normal((2, 5)), rng.standard_normal((2, 5))
            fa, fb = f(a), f(b)
            assert np.sum((fa - fb) ** 2) <= np.sum((fa - fb) * (a - b)) + 1e-12


def test_random_candidate_optimality(rng):
    a, z = 0.8, 0.3
    c = np.array([0.5, -1.5])
    cases = [
        (lambda x: prox_nonneg_quad(a, z, x[0]) * np.ones(1),
         lambda x, xt: np.inf if x[0] < 0 else a * 0.5 * (x[0] - z) ** 2 + 0.5 * (x[0] - xt[0]) ** 2, 1),
        (lambda x: prox_flow_quad(a, z, c, x),
         lambda x, xt: a * 0.5 * (z + c @ x) ** 2 + 0.5 * np.sum((x - xt) ** 2), 2),
        (lambda x: prox_tv_shrink(a, x),
         lambda x, xt: a * np.linalg.norm(x) + 0.5 * np.sum((x - xt) ** 2), 2),
    ]
    for prox, obj, d in cases:
        xt = rng.standard_normal(d)
        x = prox(xt)
        best = obj(x, xt)
        cands = x + 0.5 * rng.standard_normal((1000, d))
        assert all(best <= obj(y, xt) + 1e-12 for y in cands)


def test_pointwise_decoupling(rng):
    y = rng.standard_normal((2, 4, 5))
    whole = prox_tv_shrink(0.4, y, axis=0)
    for i in range(4):
        for j in range(5):
            assert np.allclose(whole[:, i, j], prox_tv_shrink(0.4, y[:, i, j]))
    whole = prox_tv_dual_project(0.4, y, axis=0)
    assert np.allclose(whole[:, 2, 3], prox_tv_dual_project(0.4, y[:, 2, 3]))

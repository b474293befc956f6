"""PDHG and ADMM solvers for the image and motion updates."""

import numpy as np
import pytest

from dynpat.admm import AdmmConfig, AdmmFlowSolver, AdmmImageSolver, admm_solve_p, admm_solve_v
from dynpat.diffops import TransportOperator
from dynpat.energy import p_subproblem_energy, v_subproblem_energy
from dynpat.grid import RegParams
from dynpat.linsolve import SolverError
from dynpat.pdhg import PdhgConfig, PdhgFlowSolver, PdhgImageSolver, pdhg_solve_p, pdhg_solve_v

from conftest import translating_blob


def p_instance(rng, T=3, n=8):
    p_tilde = rng.random((T, n, n))
    v = 0.5 * rng.standard_normal((T, 2, n, n))
    v[-1] = 0
    return p_tilde, v


def rel_gap(a, b):
    return abs(a - b) / max(abs(a), abs(b))


def test_pdhg_p_trivial(rng):
    p_tilde = rng.random((2, 8, 8))
    out = pdhg_solve_p(p_tilde, np.zeros((2, 2, 8, 8)), RegParams(0, 0, 0))
    assert np.array_equal(out, p_tilde)
    out = admm_solve_p(p_tilde, np.zeros((2, 2, 8, 8)), RegParams(0, 0, 0))
    assert np.array_equal(out, p_tilde)


def test_tv_denoising_cross_solver(rng):
    p_tilde = rng.random((1, 8, 8))
    v = np.zeros((1, 2, 8, 8))
    a = 0.1
    e = {}
    for name, solver, iters in (("pdhg", PdhgImageSolver(), 5000), ("admm", AdmmImageSolver(), 500)):
        p = solver.solve(p_tilde, v, a, 0.0, max_iters=iters)
        assert p.min() >= 0
        e[name] = p_subproblem_energy(p, p_tilde, TransportOperator(v), a, 0.0)
    assert rel_gap(e["pdhg"], e["admm"]) < 1e-3


def test_p_update_cross_solver(rng):
    p_tilde, v = p_instance(rng)
    a, g = 0.1, 1.0
    op = TransportOperator(v)
    ep = p_subproblem_energy(PdhgImageSolver().solve(p_tilde, v, a, g, max_iters=5000),
                             p_tilde, op, a, g)
    ea = p_subproblem_energy(AdmmImageSolver().solve(p_tilde, v, a, g, max_iters=500),
                             p_tilde, op, a, g)
    assert rel_gap(ep, ea) < 1e-3


def test_admm_residuals_vanish(rng):
    p_tilde, v = p_instance(rng)
    solver = AdmmImageSolver()
    solver.solve(p_tilde, v, 0.1, 1.0, max_iters=500)
    assert solver.primal_residuals[-1] < 1e-6
    assert solver.dual_residuals[-1] < 1e-6
    best = np.minimum.accumulate(solver.energies)
    assert np.all(np.diff(best) <= 0)


def test_admm_rho_fixed_mode(rng):
    p_tilde, v = p_instance(rng)
    solver = AdmmImageSolver(AdmmConfig(rho=0.5, rho_mode="fixed"))
    solver.solve(p_tilde, v, 0.1, 1.0, max_iters=20)
    assert solver.rho == 0.5
    with pytest.raises(ValueError):
        AdmmConfig(over_relax=2.0)
    with pytest.raises(ValueError):
        AdmmConfig(rho_mode="sometimes")


def test_warm_start_continues(rng):
    p_tilde, v = p_instance(rng)
    solver = PdhgImageSolver(PdhgConfig(stride=1))
    solver.solve(p_tilde, v, 0.1, 1.0, max_iters=50)
    first_last = solver.energies[-1]
    solver.solve(p_tilde, v, 0.1, 1.0, max_iters=50)
    assert solver.energies[0] == pytest.approx(first_last)


def test_pdhg_fixed_steps_checked(rng):
    p_tilde, v = p_instance(rng)
    with pytest.raises(ValueError):
        PdhgImageSolver(PdhgConfig(preconditioned=False, mu=1.0, nu=1.0)).solve(p_tilde, v, 0.1, 1.0)
    p = PdhgImageSolver(PdhgConfig(preconditioned=False)).solve(p_tilde, v, 0.1, 1.0, max_iters=50)
    assert np.all(np.isfinite(p)) and p.min() >= 0
    with pytest.raises(ValueError):
        PdhgFlowSolver(PdhgConfig(preconditioned=False, mu=1.0, nu=1.0)).solve(
            p_tilde, np.zeros_like(v), 0.1, 1.0)


def test_pdhg_divergence_raises(rng, monkeypatch):
    import dynpat.pdhg as pdhg_mod

    p_tilde, v = p_instance(rng)
    # hide the step-size check so oversized steps reach the iteration
    monkeypatch.setattr(pdhg_mod, "power_norm_sq", lambda *a, **k: 0.0)
    solver = PdhgImageSolver(PdhgConfig(preconditioned=False, mu=50.0, nu=50.0, stride=1))
    with pytest.raises(SolverError) as exc:
        solver.solve(p_tilde, v, 0.1, 1.0, max_iters=200)
    assert len(exc.value.trace) >= 2


def test_pdhg_windowed_median_nonincreasing(rng):
    p_tilde, v = p_instance(rng)
    solver = PdhgImageSolver(PdhgConfig(stride=1))
    solver.solve(p_tilde, v, 0.1, 1.0, max_iters=500)
    e = np.asarray(solver.energies[1:])
    med = [np.median(e[i:i + 50]) for i in range(0, len(e), 50)]
    assert np.all(np.diff(med) <= 1e-12 * abs(med[0]))


def v_instance(rng, T=3, n=8):
    p = rng.random((T, n, n))
    return p, np.zeros((T, 2, n, n))


def test_v_update_constant_sequence(rng):
    p = np.repeat(rng.random((1, 8, 8)), 3, axis=0)
    v0 = 0.3 * rng.standard_normal((3, 2, 8, 8))
    v0[-1] = 0
    for solver in (PdhgFlowSolver(), AdmmFlowSolver()):
        v = solver.solve(p, v0, 0.05, 1.0, max_iters=200)
        assert v_subproblem_energy(v, p, 0.05, 1.0) <= v_subproblem_energy(v0, p, 0.05, 1.0)
    assert v_subproblem_energy(np.zeros_like(v0), p, 0.05, 1.0) == 0


@pytest.mark.parametrize("solver_cls", [PdhgFlowSolver, AdmmFlowSolver])
def test_v_update_huge_beta_constant(rng, solver_cls):
    p, v0 = v_instance(rng)
    v = solver_cls().solve(p, v0, 10.0, 1.0, max_iters=2000)
    assert np.var(v[:-1], axis=(-2, -1)).max() < 1e-8


def test_v_update_cross_solver(rng):
    p, v0 = v_instance(rng)
    b, g = 0.05, 1.0
    ep = v_subproblem_energy(PdhgFlowSolver().solve(p, v0, b, g, max_iters=5000), p, b, g)
    ea = v_subproblem_energy(AdmmFlowSolver().solve(p, v0, b, g, max_iters=500), p, b, g)
    assert rel_gap(ep, ea) < 1e-3


@pytest.mark.parametrize("backend", ["pdhg", "admm"])
def test_translation_recovery(backend):
    p = translating_blob(n=24, T=3, shift=1.0, width=4.0)
    shift = (1.0, 0.0)
    params = RegParams(0.0, 0.05, 1.0)
    if backend == "pdhg":
        v = pdhg_solve_v(p, np.zeros((3, 2, 24, 24)), params, PdhgConfig(preconditioned=False, max_iters=3000))
    else:
        v = admm_solve_v(p, np.zeros((3, 2, 24, 24)), params)
    grad = np.hypot(*np.gradient(p[0]))
    mask = grad > 0.5 * grad.max()
    for c in range(2):
        assert np.abs(v[0, c][mask] - shift[c]).max() <= 0.2
    assert np.all(v[-1] == 0)


def test_v_update_gamma_zero_is_identity(rng):
    p, _ = v_instance(rng)
    v0 = rng.standard_normal((3, 2, 8, 8))
    assert np.array_equal(PdhgFlowSolver().solve(p, v0, 0.1, 0.0), v0)
    assert np.array_equal(AdmmFlowSolver().solve(p, v0, 0.1, 0.0), v0)


def test_fused_image_step_matches_reference(rng):
    from dynpat._kernels import pdhg_image_step
    from dynpat.diffops import div_fwd_adj, grad_fwd
    from dynpat.prox import prox_nonneg_quad, prox_quad_conjugate, prox_tv_dual_project

    T, ny, nx = 3, 7, 6
    x, xh, pt = rng.random((3, T, ny, nx))
    y1 = 0.05 * rng.standard_normal((T, 2, ny, nx))
    y2 = rng.standard_normal((T - 1, ny, nx))
    v = rng.standard_normal((T, 2, ny, nx))
    tau, s1 = rng.random((2, T, ny, nx)) + 0.1
    s2 = rng.random((T - 1, ny, nx)) + 0.1
    a, g, theta = 0.1, 0.7, 1.0
    op = TransportOperator(v)
    ry1 = prox_tv_dual_project(a, y1 + s1[:, None] * grad_fwd(xh), axis=-3)
    ry2 = prox_quad_conjugate(g, s2, y2 + s2 * op.apply(xh))
    rx = prox_nonneg_quad(tau, pt, x - tau * (-div_fwd_adj(ry1) + op.adjoint(ry2)))
    rxh = rx + theta * (rx - x)
    pdhg_image_step(x, xh, y1, y2, pt, v, tau, s1, s2, a, g, theta, np.empty((T, ny, nx)))
    for got, ref in ((y1, ry1), (y2, ry2), (x, rx), (xh, rxh)):
        assert np.allclose(got, ref, atol=1e-13)


def test_fused_flow_step_matches_reference(rng):
    from dynpat._kernels import pdhg_flow_step
    from dynpat.diffops import div_fwd_adj, grad_central, grad_fwd
    from dynpat.prox import prox_flow_quad, prox_tv_dual_project

    T, ny, nx = 3, 6, 7
    p = rng.random((T, ny, nx))
    v, vh = rng.standard_normal((2, T - 1, 2, ny, nx))
    y = 0.05 * rng.standard_normal((T - 1, 2, 2, ny, nx))
    z, c = p[1:] - p[:-1], grad_central(p[:-1])
    b, mg, mu, nu, theta = 0.1, 0.25 * 0.7, 0.25, 0.5, 1.0
    ry = prox_tv_dual_project(b, y + nu * grad_fwd(vh), axis=-3)
    rv = prox_flow_quad(mg, z, c, v - mu * (-div_fwd_adj(ry)), axis=1)
    rvh = rv + theta * (rv - v)
    pdhg_flow_step(v, vh, y, z, c, b, mg, mu, nu, theta, np.empty((ny, nx)))
    for got, ref in ((y, ry), (v, rv), (vh, rvh)):
        assert np.allclose(got, ref, atol=1e-13)

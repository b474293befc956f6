"""Primal-dual hybrid gradient solvers for the two convex sub-problems.

Image update::

    min_{p >= 0} 0.5 |p - p~|^2 + a |grad p|_1 + g/2 |D_v p|^2

with ``K = [grad; D_v]``, diagonal (Pock-Chambolle, alpha = 1) step sizes.

Motion update, separable over frames::

    min_v b sum_i |grad v_i|_1 + g/2 |p_{t+1} - p_t + grad_c(p_t) . v_t|^2

with ``K = I_2 (x) grad`` and fixed steps ``mu = 1/(2d)``, ``nu = 1/2``.

Both solvers keep their primal and dual variables between calls so a later
call continues from where the previous one stopped.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .diffops import (
    TransportOperator,
    div_fwd_adj,
    grad_central,
    grad_fwd,
    gradient_matrix,
    power_norm_sq,
)
from ._kernels import pdhg_flow_step, pdhg_image_step
from .energy import p_subproblem_energy, v_subproblem_energy
from .linsolve import SolverError
from .prox import prox_flow_quad, prox_nonneg_quad, prox_quad_conjugate, prox_tv_dual_project

_DIVERGENCE_FACTOR = 1e3


@dataclass
class PdhgConfig:
    """PDHG settings.

    ``mu``/``nu`` are only used with ``preconditioned=False``. ``None`` picks
    ``nu = 1/2`` and, for the motion update, ``mu = 1/(2d)``; for the image
    update ``mu`` defaults to ``0.99 / (nu |K|^2)``.
    """

    theta: float = 1.0
    preconditioned: bool = True
    mu: float = None
    nu: float = None
    max_iters: int = 200
    stride: int = 10

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")
        if self.max_iters < 1 or self.stride < 1:
            raise ValueError("max_iters and stride must be >= 1")


def _check_divergence(energy, initial, trace, scale):
    # ``scale`` guards against a zero initial energy (already optimal start)
    if not np.isfinite(energy) or energy > _DIVERGENCE_FACTOR * max(initial, scale):
        err = SolverError(f"PDHG diverged: energy {energy:.3g} vs initial {initial:.3g}")
        err.trace = list(trace)
        raise err


def _abs_sums(K):
    A = abs(K)
    return np.asarray(A.sum(axis=1)).ravel(), np.asarray(A.sum(axis=0)).ravel()


class PdhgImageSolver:
    """Warm-startable PDHG for the image update."""

    def __init__(self, config=None):
        self.config = config or PdhgConfig()
        self.x = None
        self.x_hat = None
        self.y1 = None
        self.y2 = None
        self.energies = []

    def _steps(self, transport, shape):
        T, ny, nx = shape
        if not self.config.preconditioned:
            norm_sq = power_norm_sq(
                lambda p: np.concatenate([grad_fwd(p).ravel(), transport.apply(p).ravel()]),
                lambda y: self._kt(y, transport, shape), shape, iters=50)
            nu = self.config.nu if self.config.nu is not None else 0.5
            # 1% margin over the power-iteration estimate
            mu = self.config.mu if self.config.mu is not None else 0.99 / (nu * norm_sq)
            if mu * nu * norm_sq > 1.0 + 1e-6:
                raise ValueError(f"mu*nu*|K|^2 = {mu * nu * norm_sq:.3g} exceeds 1")
            return mu, nu, nu
        K = sp.vstack([gradient_matrix(ny, nx, T), transport.matrix()], format="csr")
        row, col = _abs_sums(K)
        sigma = np.where(row > 0, 1.0 / np.where(row > 0, row, 1.0), 1.0)
        tau = 1.0 / np.maximum(col, 1e-12)
        n_grad = 2 * T * ny * nx
        s1 = sigma[:n_grad].reshape(T, 2, ny, nx)
        # One step per pixel for the isotropic block; the smaller one keeps the
        # preconditioner valid and the ball projection exact.
        s1 = np.broadcast_to(s1.min(axis=1, keepdims=True), s1.shape)
        s2 = sigma[n_grad:].reshape(transport.residual_shape)
        return tau.reshape(shape), s1, s2

    @staticmethod
    def _kt(y, transport, shape):
        T, ny, nx = shape
        n1 = 2 * T * ny * nx
        y1 = y[:n1].reshape(T, 2, ny, nx)
        y2 = y[n1:].reshape(transport.residual_shape)
        return -div_fwd_adj(y1) + transport.adjoint(y2)

    def solve(self, p_tilde, v, alpha_t, gamma_t, max_iters=None, trace=None):
        p_tilde = np.asarray(p_tilde, dtype=float)
        shape = p_tilde.shape
        max_iters = max_iters or self.config.max_iters
        if alpha_t == 0 and gamma_t == 0:
            self.x = np.maximum(p_tilde, 0.0)
            self.x_hat = self.x.copy()
            return self.x.copy()
        transport = TransportOperator(v)
        T, ny, nx = shape
        if self.x is None or self.x.shape != shape:
            self.x = np.maximum(p_tilde, 0.0)
            self.x_hat = self.x.copy()
            self.y1 = np.zeros((T, 2, ny, nx))
            self.y2 = np.zeros(transport.residual_shape)
        tau, s1, s2 = self._steps(transport, shape)
        theta = self.config.theta

        def energy(p):
            return p_subproblem_energy(p, p_tilde, transport, alpha_t, gamma_t)

        best = self.x.copy()
        best_e = e0 = energy(best)
        scale = energy(np.zeros(shape))
        self.energies = [e0]
        tau = np.ascontiguousarray(np.broadcast_to(tau, shape), dtype=float)
        s1 = np.ascontiguousarray(np.broadcast_to(s1, (T, 2, ny, nx))[:, 0], dtype=float)
        s2 = np.ascontiguousarray(np.broadcast_to(s2, transport.residual_shape), dtype=float)
        v_arr = np.ascontiguousarray(transport.v)
        kty = np.empty(shape)
        for k in range(1, max_iters + 1):
            pdhg_image_step(self.x, self.x_hat, self.y1, self.y2, p_tilde, v_arr, tau, s1, s2,
                            float(alpha_t), float(gamma_t), float(theta), kty)
            if k % self.config.stride == 0 or k == max_iters:
                e = energy(self.x)
                self.energies.append(e)
                if trace is not None:
                    trace.record("pdhg-p", e)
                _check_divergence(e, e0, self.energies, scale)
                if e < best_e:
                    best, best_e = self.x.copy(), e
        return best


class PdhgFlowSolver:
    """Warm-startable PDHG for the motion update, vectorized over frames."""

    def __init__(self, config=None):
        self.config = config or PdhgConfig(preconditioned=False)
        self.v = None
        self.v_hat = None
        self.y = None
        self.energies = []

    def solve(self, p, v_init, beta_t, gamma_t, max_iters=None, trace=None):
        p = np.asarray(p, dtype=float)
        T, ny, nx = p.shape
        max_iters = max_iters or self.config.max_iters
        if self.v is None or self.v.shape != (T, 2, ny, nx):
            self.v = np.array(v_init, dtype=float)
            self.v_hat = self.v.copy()
            self.y = np.zeros((T, 2, 2, ny, nx))
        if gamma_t == 0 or T < 2:
            return self.v.copy()
        d = 2
        mu = self.config.mu if self.config.mu is not None else 1.0 / (2 * d)
        nu = self.config.nu if self.config.nu is not None else 0.5
        if mu * nu * 4 * d > 1.0 + 1e-12:
            raise ValueError("mu*nu*4d must not exceed 1")
        theta = self.config.theta

        z = p[1:] - p[:-1]
        c = grad_central(p[:-1])
        mg = mu * gamma_t

        def energy(v):
            return v_subproblem_energy(v, p, beta_t, gamma_t)

        best = self.v.copy()
        best_e = e0 = energy(best)
        scale = energy(np.zeros_like(self.v))
        self.energies = [e0]
        vm, vhm, ym = self.v[:-1], self.v_hat[:-1], self.y[:-1]
        buf = np.empty((ny, nx))
        for k in range(1, max_iters + 1):
            pdhg_flow_step(vm, vhm, ym, z, c, float(beta_t), float(mg), float(mu), float(nu),
                           float(theta), buf)
            if k % self.config.stride == 0 or k == max_iters:
                e = energy(self.v)
                self.energies.append(e)
                if trace is not None:
                    trace.record("pdhg-v", e)
                _check_divergence(e, e0, self.energies, scale)
                if e < best_e:
                    best, best_e = self.v.copy(), e
        return best


def pdhg_solve_p(p_tilde, v, params, cfg=None, solver=None):
    """Approximate minimizer of the image update for fixed motion ``v``."""
    a, _, g = params.scaled()
    solver = solver or PdhgImageSolver(cfg)
    return solver.solve(p_tilde, v, a, g)


def pdhg_solve_v(p, v_init, params, cfg=None, solver=None):
    """Approximate minimizer of the motion update for fixed images ``p``."""
    _, b, g = params.scaled()
    solver = solver or PdhgFlowSolver(cfg)
    return solver.solve(p, v_init, b, g)

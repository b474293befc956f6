"""ADMM (split Bregman) solvers for the two convex sub-problems.

Image update: ``K p = [grad p; p]``, ``G(p) = 0.5|p - p~|^2 + g/2 |D_v p|^2``,
``F(y) = a |y1|_1 + chi_+(y2)``. The x-update solves

    ((1 + rho) I + g D_v^T D_v + rho grad^T grad) p = p~ + rho grad^T (y1 - w1) + rho (y2 - w2)

matrix-free with warm-started CG. Motion update, per frame: ``K v = I_2 (x) grad``
and the x-update solves the explicitly assembled sparse system

    (g E^T E + rho I_2 (x) Delta+) v = -g E^T (p_{t+1} - p_t) + rho K^T (y - w)

with a configurable Krylov solver and preconditioner. The inner tolerance
tightens as ``tol0 / k^1.5`` and every inner solve does at least
``min_inner_iters`` iterations.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .diffops import (
    TransportOperator,
    div_fwd_adj,
    e_matrix,
    grad_fwd,
    neg_laplacian_matrix,
)
from .energy import p_subproblem_energy, tv
from .linsolve import SolverError, SparseSpdSystem, cg
from .prox import prox_tv_shrink


@dataclass
class AdmmConfig:
    """ADMM settings.

    ``rho_mode='adaptive'`` applies residual balancing (factor ``rho_factor``
    when one residual exceeds ``rho_ratio`` times the other) during the first
    ``adapt_iters`` iterations of every call, then freezes rho.
    """

    rho: float = 1.0
    rho_mode: str = "adaptive"
    adapt_iters: int = 25
    rho_ratio: float = 10.0
    rho_factor: float = 2.0
    over_relax: float = 1.8
    solver: str = "cg"
    preconditioner: str = "none"
    tol0: float = 1e-3
    tol_power: float = 1.5
    min_inner_iters: int = 3
    max_inner_iters: int = 500
    max_iters: int = 100
    stride: int = 5
    shift: float = 1e-8

    def __post_init__(self):
        if not 0.0 < self.over_relax < 2.0:
            raise ValueError("over-relaxation must lie in (0, 2)")
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if self.rho_mode not in ("adaptive", "fixed"):
            raise ValueError("rho_mode must be 'adaptive' or 'fixed'")

    def inner_tol(self, k):
        return self.tol0 / k ** self.tol_power


def flow_config(**kw):
    """Defaults for the motion update: fixed rho = 0.1 (2D)."""
    kw.setdefault("rho", 0.1)
    kw.setdefault("rho_mode", "fixed")
    return AdmmConfig(**kw)


class AdmmImageSolver:
    """Warm-startable ADMM for the image update."""

    def __init__(self, config=None):
        self.config = config or AdmmConfig()
        self.rho = self.config.rho
        self.x = None
        self.y1 = self.y2 = self.w1 = self.w2 = None
        self.energies = []
        self.primal_residuals = []
        self.dual_residuals = []
        self.inner_iterations = []

    def solve(self, p_tilde, v, alpha_t, gamma_t, max_iters=None, trace=None):
        cfg = self.config
        p_tilde = np.asarray(p_tilde, dtype=float)
        shape = p_tilde.shape
        max_iters = max_iters or cfg.max_iters
        if alpha_t == 0 and gamma_t == 0:
            self.x = np.maximum(p_tilde, 0.0)
            return self.x.copy()
        transport = TransportOperator(v)
        if self.x is None or self.x.shape != shape:
            self.x = np.maximum(p_tilde, 0.0)
            self.y1 = grad_fwd(self.x)
            self.y2 = self.x.copy()
            self.w1 = np.zeros_like(self.y1)
            self.w2 = np.zeros_like(self.y2)

        def energy(p):
            return p_subproblem_energy(p, p_tilde, transport, alpha_t, gamma_t)

        best = np.maximum(self.x, 0.0)
        best_e = energy(best)
        self.energies = [best_e]
        self.primal_residuals, self.dual_residuals, self.inner_iterations = [], [], []
        s = cfg.over_relax
        for k in range(1, max_iters + 1):
            rho = self.rho

            def normal_op(xf, rho=rho):
                x = xf.reshape(shape)
                out = (1.0 + rho) * x - rho * div_fwd_adj(grad_fwd(x))
                if gamma_t:
                    out += gamma_t * transport.adjoint(transport.apply(x))
                return out.ravel()

            rhs = p_tilde - rho * div_fwd_adj(self.y1 - self.w1) + rho * (self.y2 - self.w2)
            xf, info = cg(normal_op, rhs.ravel(), x0=self.x.ravel(), tol=cfg.inner_tol(k),
                          min_iters=cfg.min_inner_iters, max_iters=cfg.max_inner_iters)
            self.inner_iterations.append(info.iterations)
            self.x = xf.reshape(shape)

            kx1, kx2 = grad_fwd(self.x), self.x
            h1 = s * kx1 + (1 - s) * self.y1
            h2 = s * kx2 + (1 - s) * self.y2
            y1_old, y2_old = self.y1, self.y2
            self.y1 = prox_tv_shrink(alpha_t / rho, h1 + self.w1, axis=-3)
            self.y2 = np.maximum(h2 + self.w2, 0.0)
            self.w1 = self.w1 + h1 - self.y1
            self.w2 = self.w2 + h2 - self.y2

            r_prim = np.sqrt(np.sum((kx1 - self.y1) ** 2) + np.sum((kx2 - self.y2) ** 2))
            r_dual = rho * np.linalg.norm(
                -div_fwd_adj(self.y1 - y1_old) + (self.y2 - y2_old))
            self.primal_residuals.append(r_prim)
            self.dual_residuals.append(r_dual)
            if cfg.rho_mode == "adaptive" and k <= cfg.adapt_iters:
                self._balance(r_prim, r_dual)

            if k % cfg.stride == 0 or k == max_iters:
                cand = np.maximum(self.x, 0.0)
                e = energy(cand)
                self.energies.append(e)
                if trace is not None:
                    trace.record("admm-p", e)
                if e < best_e:
                    best, best_e = cand, e
        return best

    def _balance(self, r_prim, r_dual):
        cfg = self.config
        if r_prim > cfg.rho_ratio * r_dual:
            factor = cfg.rho_factor
        elif r_dual > cfg.rho_ratio * r_prim:
            factor = 1.0 / cfg.rho_factor
        else:
            return
        self.rho *= factor
        # scaled duals w = u / rho
        self.w1 = self.w1 / factor
        self.w2 = self.w2 / factor


class AdmmFlowSolver:
    """Warm-startable per-frame ADMM for the motion update."""

    def __init__(self, config=None):
        self.config = config or flow_config()
        self.rho = self.config.rho
        self.v = None
        self.y = self.w = None
        self.energies = []
        self.inner_iterations = []
        self.primal_residuals = []

    def build_system(self, p_frame, gamma_t):
        """Sparse SPD matrix ``g E^T E + rho blockdiag(Delta+, Delta+) + shift I``."""
        return flow_system_matrix(p_frame, gamma_t, self.rho, self.config.shift)

    def solve(self, p, v_init, beta_t, gamma_t, max_iters=None, trace=None):
        cfg = self.config
        p = np.asarray(p, dtype=float)
        T, ny, nx = p.shape
        max_iters = max_iters or cfg.max_iters
        if self.v is None or self.v.shape != (T, 2, ny, nx):
            self.v = np.array(v_init, dtype=float)
            self.y = grad_fwd(self.v)
            self.w = np.zeros_like(self.y)
        if gamma_t == 0 or T < 2:
            return self.v.copy()
        rho = self.rho
        s = cfg.over_relax
        best = self.v.copy()
        self.inner_iterations = []
        self.primal_residuals = []
        total_e = []
        for t in range(T - 1):
            z = p[t + 1] - p[t]
            E = e_matrix(p[t])
            system = SparseSpdSystem(self.build_system(p[t], gamma_t),
                                     preconditioner=cfg.preconditioner, solver=cfg.solver)
            gz = -gamma_t * (E.T @ z.ravel())

            def energy(vt):
                r = z.ravel() + E @ vt.ravel()
                return beta_t * tv(vt) + 0.5 * gamma_t * float(r @ r)

            best_e = energy(self.v[t])
            for k in range(1, max_iters + 1):
                q = self.y[t] - self.w[t]
                rhs = gz + rho * (-div_fwd_adj(q)).ravel()
                vf, info = system.solve(rhs, x0=self.v[t].ravel(), tol=cfg.inner_tol(k),
                                        min_iters=cfg.min_inner_iters,
                                        max_iters=cfg.max_inner_iters)
                self.inner_iterations.append(info.iterations)
                self.v[t] = vf.reshape(2, ny, nx)
                kv = grad_fwd(self.v[t])
                h = s * kv + (1 - s) * self.y[t]
                self.y[t] = prox_tv_shrink(beta_t / rho, h + self.w[t], axis=-3)
                self.w[t] += h - self.y[t]
                if t == 0:
                    self.primal_residuals.append(float(np.linalg.norm(kv - self.y[t])))
                if k % cfg.stride == 0 or k == max_iters:
                    e = energy(self.v[t])
                    if e < best_e:
                        best[t], best_e = self.v[t], e
            total_e.append(best_e)
        e_sum = float(sum(total_e))
        self.energies.append(e_sum)
        if trace is not None:
            trace.record("admm-v", e_sum)
        return best


def flow_system_matrix(p_frame, gamma_t, rho, shift=0.0):
    """Assemble ``g E^T E + rho I_2 (x) Delta+ (+ shift I)`` for one frame."""
    ny, nx = p_frame.shape
    E = e_matrix(p_frame)
    lap = neg_laplacian_matrix(ny, nx)
    A = gamma_t * (E.T @ E) + rho * sp.block_diag([lap, lap])
    if shift:
        A = A + shift * rho * sp.identity(2 * ny * nx)
    return sp.csr_matrix(A)


def admm_solve_p(p_tilde, v, params, cfg=None, solver=None):
    """Approximate minimizer of the image update for fixed motion ``v``."""
    a, _, g = params.scaled()
    solver = solver or AdmmImageSolver(cfg)
    return solver.solve(p_tilde, v, a, g)


def admm_solve_v(p, v_init, params, cfg=None, solver=None):
    """Approximate minimizer of the motion update for fixed images ``p``."""
    _, b, g = params.scaled()
    solver = solver or AdmmFlowSolver(cfg)
    return solver.solve(p, v_init, b, g)


__all__ = [
    "AdmmConfig",
    "AdmmFlowSolver",
    "AdmmImageSolver",
    "SolverError",
    "admm_solve_p",
    "admm_solve_v",
    "flow_config",
    "flow_system_matrix",
]

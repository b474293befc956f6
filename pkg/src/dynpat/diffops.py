"""Finite-difference and optical-flow transport operators.

Arrays follow the layout used across the package: images are ``(..., ny, nx)``
and vector fields ``(..., 2, ny, nx)`` with component 0 along x (last axis)
and component 1 along y. Motion is measured in pixels per frame.

Every operator here has a matrix-free implementation and a sparse matrix
builder; the two are checked against each other in the tests.
"""

import numpy as np
import scipy.sparse as sp

from ._validation import check_same_shape

_AXES = (-1, -2)


def _fwd_diff(u, axis):
    d = np.zeros_like(u)
    n = u.shape[axis]
    if n > 1:
        hi = [slice(None)] * u.ndim
        lo = [slice(None)] * u.ndim
        hi[axis] = slice(1, None)
        lo[axis] = slice(0, -1)
        d[tuple(lo)] = u[tuple(hi)] - u[tuple(lo)]
    return d


def _fwd_diff_adj(y, axis):
    # Transpose of _fwd_diff: r[0] = -y[0], r[j] = y[j-1] - y[j], r[n-1] = y[n-2].
    y = np.moveaxis(y, axis, -1)
    r = np.zeros_like(y)
    n = y.shape[-1]
    if n > 1:
        r[..., :-1] -= y[..., :-1]
        r[..., 1:] += y[..., :-1]
    return np.moveaxis(r, -1, axis)


def grad_fwd(u):
    """Forward differences with replicate boundary; last difference is 0."""
    u = np.asarray(u, dtype=float)
    return np.stack([_fwd_diff(u, a) for a in _AXES], axis=-3)


def div_fwd_adj(y):
    """Discrete divergence, the negative adjoint of :func:`grad_fwd`."""
    y = np.asarray(y, dtype=float)
    return -(_fwd_diff_adj(y[..., 0, :, :], -1) + _fwd_diff_adj(y[..., 1, :, :], -2))


def grad_fwd_adj(y):
    return -div_fwd_adj(y)


def _central_diff(u, axis):
    u = np.moveaxis(u, axis, -1)
    d = np.zeros_like(u)
    n = u.shape[-1]
    if n > 1:
        d[..., 0] = u[..., 1] - u[..., 0]
        d[..., -1] = u[..., -1] - u[..., -2]
        if n > 2:
            d[..., 1:-1] = 0.5 * (u[..., 2:] - u[..., :-2])
    return np.moveaxis(d, -1, axis)


def _central_diff_adj(w, axis):
    w = np.moveaxis(w, axis, -1)
    r = np.zeros_like(w)
    n = w.shape[-1]
    if n > 1:
        r[..., 0] -= w[..., 0]
        r[..., 1] += w[..., 0]
        r[..., -2] -= w[..., -1]
        r[..., -1] += w[..., -1]
        if n > 2:
            r[..., :-2] -= 0.5 * w[..., 1:-1]
            r[..., 2:] += 0.5 * w[..., 1:-1]
    return np.moveaxis(r, -1, axis)


def grad_central(u):
    """Central differences, one-sided at the boundary."""
    u = np.asarray(u, dtype=float)
    return np.stack([_central_diff(u, a) for a in _AXES], axis=-3)


def grad_central_adj(y):
    y = np.asarray(y, dtype=float)
    return _central_diff_adj(y[..., 0, :, :], -1) + _central_diff_adj(y[..., 1, :, :], -2)


class TransportOperator:
    """Linearized optical-flow residual ``D_v p`` for a frozen motion field.

    Frame ``t`` of the output is ``p[t+1] - p[t] + grad_central(p[t]) . v[t]``
    for ``t < T-1``. The final frame carries no residual since
    ``p[T] := p[T-1]`` and ``v[T-1] := 0``.
    """

    def __init__(self, v):
        v = np.asarray(v, dtype=float)
        if v.ndim != 4 or v.shape[1] != 2:
            raise ValueError(f"v must have shape (T, 2, ny, nx), got {v.shape}")
        self.v = v
        self.image_shape = (v.shape[0],) + v.shape[2:]

    @property
    def residual_shape(self):
        T, ny, nx = self.image_shape
        return (max(T - 1, 0), ny, nx)

    def apply(self, p):
        check_same_shape(p, np.empty(self.image_shape), ("p", "v-frames"))
        if p.shape[0] < 2:
            return np.zeros(self.residual_shape)
        g = grad_central(p[:-1])
        return p[1:] - p[:-1] + np.einsum("tcij,tcij->tij", g, self.v[:-1])

    def adjoint(self, r):
        r = np.asarray(r, dtype=float)
        check_same_shape(r, np.empty(self.residual_shape), ("r", "residual"))
        out = np.zeros(self.image_shape)
        if r.shape[0] == 0:
            return out
        out[1:] += r
        out[:-1] -= r
        out[:-1] += grad_central_adj(self.v[:-1] * r[:, None])
        return out

    def matrix(self):
        """Sparse matrix of shape (N*(T-1), N*T) acting on C-order flattened sequences."""
        T, ny, nx = self.image_shape
        N = ny * nx
        if T < 2:
            return sp.csr_matrix((0, N * T))
        Gx, Gy = central_matrices(ny, nx)
        blocks = []
        for t in range(T - 1):
            vx = sp.diags(self.v[t, 0].ravel())
            vy = sp.diags(self.v[t, 1].ravel())
            blocks.append(vx @ Gx + vy @ Gy)
        I = sp.identity(N, format="csr")
        rows = []
        for t in range(T - 1):
            row = [None] * T
            row[t] = blocks[t] - I
            row[t + 1] = I
            rows.append(row)
        return sp.bmat(rows, format="csr")


def transport_apply(v, p):
    return TransportOperator(v).apply(p)


def transport_adjoint(v, r):
    return TransportOperator(v).adjoint(r)


def e_matrix_apply(p_frame, v_frame):
    """``E(p) v = sum_i v_i * d_i p`` with central differences of a single frame."""
    g = grad_central(p_frame)
    return np.einsum("cij,cij->ij", g, v_frame)


def e_matrix_adjoint(p_frame, w):
    """Transpose of :func:`e_matrix_apply`: image -> vector field."""
    return grad_central(p_frame) * np.asarray(w, dtype=float)[None]


def e_matrix(p_frame):
    """Sparse ``N x 2N`` matrix ``[diag(d_x p), diag(d_y p)]``."""
    g = grad_central(p_frame)
    return sp.hstack([sp.diags(g[0].ravel()), sp.diags(g[1].ravel())], format="csr")


# --- sparse builders -----------------------------------------------------------


def _fwd_1d(n):
    if n == 1:
        return sp.csr_matrix((1, 1))
    main = -np.ones(n)
    main[-1] = 0.0
    return sp.diags([main, np.ones(n - 1)], [0, 1], format="csr")


def _central_1d(n):
    if n == 1:
        return sp.csr_matrix((1, 1))
    D = sp.lil_matrix((n, n))
    D[0, 0], D[0, 1] = -1.0, 1.0
    D[n - 1, n - 2], D[n - 1, n - 1] = -1.0, 1.0
    for j in range(1, n - 1):
        D[j, j - 1], D[j, j + 1] = -0.5, 0.5
    return D.tocsr()


def gradient_matrices(ny, nx):
    """Sparse forward-difference matrices (Dx, Dy) on C-order flattened images."""
    Dx = sp.kron(sp.identity(ny), _fwd_1d(nx), format="csr")
    Dy = sp.kron(_fwd_1d(ny), sp.identity(nx), format="csr")
    return Dx, Dy


def central_matrices(ny, nx):
    Gx = sp.kron(sp.identity(ny), _central_1d(nx), format="csr")
    Gy = sp.kron(_central_1d(ny), sp.identity(nx), format="csr")
    return Gx, Gy


def gradient_matrix(ny, nx, n_frames=1):
    """Sparse ``I_T (x) grad_fwd`` mapping (T, ny, nx) to (T, 2, ny, nx) flattened."""
    Dx, Dy = gradient_matrices(ny, nx)
    G = sp.vstack([Dx, Dy], format="csr")
    if n_frames == 1:
        return G
    return sp.kron(sp.identity(n_frames), G, format="csr")


def neg_laplacian_matrix(ny, nx):
    """``Delta+ = grad_fwd^T grad_fwd``, the positive semidefinite Neumann Laplacian."""
    Dx, Dy = gradient_matrices(ny, nx)
    return (Dx.T @ Dx + Dy.T @ Dy).tocsr()


def power_norm_sq(apply, adjoint, shape, iters=100, seed=0):
    """Power-iteration estimate of ``|K|_2^2`` from ``apply``/``adjoint`` callables."""
    x = np.random.default_rng(seed).standard_normal(shape)
    est = 0.0
    for _ in range(iters):
        x /= np.linalg.norm(x)
        Kx = apply(x)
        est = float(np.sum(Kx * Kx))
        x = adjoint(Kx)
    return est

"""Fused numba kernels for one PDHG iteration of each sub-problem.

Each kernel updates its arguments in place and reproduces the numpy
composition of ``diffops`` and ``prox`` used in :mod:`dynpat.pdhg`.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _central(u, i, j, ny, nx):
    if nx < 2:
        cx = 0.0
    elif j == 0:
        cx = u[i, 1] - u[i, 0]
    elif j == nx - 1:
        cx = u[i, nx - 1] - u[i, nx - 2]
    else:
        cx = 0.5 * (u[i, j + 1] - u[i, j - 1])
    if ny < 2:
        cy = 0.0
    elif i == 0:
        cy = u[1, j] - u[0, j]
    elif i == ny - 1:
        cy = u[ny - 1, j] - u[ny - 2, j]
    else:
        cy = 0.5 * (u[i + 1, j] - u[i - 1, j])
    return cx, cy


@njit(cache=True)
def _central_adj_add(w, out, ny, nx, comp):
    # out += (central difference along ``comp``)^T w
    if comp == 0:
        n = nx
    else:
        n = ny
    if n < 2:
        return
    for i in range(ny):
        for j in range(nx):
            k = j if comp == 0 else i
            val = w[i, j]
            if val == 0.0:
                continue
            if k == 0:
                a, b, h = 0, 1, 1.0
            elif k == n - 1:
                a, b, h = n - 2, n - 1, 1.0
            else:
                a, b, h = k - 1, k + 1, 0.5
            if comp == 0:
                out[i, a] -= h * val
                out[i, b] += h * val
            else:
                out[a, j] -= h * val
                out[b, j] += h * val


@njit(cache=True)
def _grad_t_add(yx, yy, out, ny, nx, sign):
    # out += sign * grad_fwd^T [yx, yy]
    for i in range(ny):
        for j in range(nx):
            r = 0.0
            if j < nx - 1:
                r -= yx[i, j]
            if j > 0:
                r += yx[i, j - 1]
            if i < ny - 1:
                r -= yy[i, j]
            if i > 0:
                r += yy[i - 1, j]
            out[i, j] += sign * r


@njit(cache=True)
def pdhg_image_step(x, xh, y1, y2, p_tilde, v, tau, s1, s2, alpha, gamma, theta, kty):
    """One preconditioned PDHG iteration for the image update (in place).

    Shapes: ``x, xh, p_tilde, tau, s1, kty`` are ``(T, ny, nx)``, ``y1`` is
    ``(T, 2, ny, nx)``, ``y2, s2`` are ``(T-1, ny, nx)``, ``v`` is
    ``(T, 2, ny, nx)``.
    """
    T, ny, nx = x.shape
    # dual TV block
    for t in range(T):
        for i in range(ny):
            for j in range(nx):
                gx = xh[t, i, j + 1] - xh[t, i, j] if j < nx - 1 else 0.0
                gy = xh[t, i + 1, j] - xh[t, i, j] if i < ny - 1 else 0.0
                a = y1[t, 0, i, j] + s1[t, i, j] * gx
                b = y1[t, 1, i, j] + s1[t, i, j] * gy
                if alpha == 0.0:
                    a = 0.0
                    b = 0.0
                else:
                    f = np.sqrt(a * a + b * b) / alpha
                    if f > 1.0:
                        a /= f
                        b /= f
                y1[t, 0, i, j] = a
                y1[t, 1, i, j] = b
    # dual transport block
    for t in range(T - 1):
        for i in range(ny):
            for j in range(nx):
                if gamma == 0.0:
                    y2[t, i, j] = 0.0
                    continue
                cx, cy = _central(xh[t], i, j, ny, nx)
                d = xh[t + 1, i, j] - xh[t, i, j] + cx * v[t, 0, i, j] + cy * v[t, 1, i, j]
                s = s2[t, i, j]
                y2[t, i, j] = gamma / (gamma + s) * (y2[t, i, j] + s * d)
    # K^T y
    kty[:] = 0.0
    for t in range(T):
        _grad_t_add(y1[t, 0], y1[t, 1], kty[t], ny, nx, 1.0)
    for t in range(T - 1):
        for i in range(ny):
            for j in range(nx):
                r = y2[t, i, j]
                kty[t + 1, i, j] += r
                kty[t, i, j] -= r
        _central_adj_add(v[t, 0] * y2[t], kty[t], ny, nx, 0)
        _central_adj_add(v[t, 1] * y2[t], kty[t], ny, nx, 1)
    # primal step with over-relaxation
    for t in range(T):
        for i in range(ny):
            for j in range(nx):
                tt = tau[t, i, j]
                xn = (tt * p_tilde[t, i, j] + x[t, i, j] - tt * kty[t, i, j]) / (tt + 1.0)
                if xn < 0.0:
                    xn = 0.0
                xh[t, i, j] = xn + theta * (xn - x[t, i, j])
                x[t, i, j] = xn


@njit(cache=True)
def pdhg_flow_step(v, vh, y, z, c, beta, mg, mu, nu, theta, buf):
    """One fixed-step PDHG iteration for the motion update of frames ``0..T-2``.

    Shapes: ``v, vh`` are ``(T-1, 2, ny, nx)``, ``y`` is ``(T-1, 2, 2, ny, nx)``,
    ``z`` is ``(T-1, ny, nx)``, ``c`` is ``(T-1, 2, ny, nx)``; ``buf`` is
    scratch of shape ``(ny, nx)``.
    """
    n_t, _, ny, nx = v.shape
    for t in range(n_t):
        for comp in range(2):
            u = vh[t, comp]
            for i in range(ny):
                for j in range(nx):
                    gx = u[i, j + 1] - u[i, j] if j < nx - 1 else 0.0
                    gy = u[i + 1, j] - u[i, j] if i < ny - 1 else 0.0
                    a = y[t, comp, 0, i, j] + nu * gx
                    b = y[t, comp, 1, i, j] + nu * gy
                    if beta == 0.0:
                        a = 0.0
                        b = 0.0
                    else:
                        f = np.sqrt(a * a + b * b) / beta
                        if f > 1.0:
                            a /= f
                            b /= f
                    y[t, comp, 0, i, j] = a
                    y[t, comp, 1, i, j] = b
        # v~ = v - mu grad^T y, stored in vh
        for comp in range(2):
            buf[:] = 0.0
            _grad_t_add(y[t, comp, 0], y[t, comp, 1], buf, ny, nx, 1.0)
            for i in range(ny):
                for j in range(nx):
                    vh[t, comp, i, j] = v[t, comp, i, j] - mu * buf[i, j]
        for i in range(ny):
            for j in range(nx):
                c0 = c[t, 0, i, j]
                c1 = c[t, 1, i, j]
                a = vh[t, 0, i, j]
                b = vh[t, 1, i, j]
                s = mg * (z[t, i, j] + c0 * a + c1 * b) / (1.0 + mg * (c0 * c0 + c1 * c1))
                a -= c0 * s
                b -= c1 * s
                vh[t, 0, i, j] = a + theta * (a - v[t, 0, i, j])
                vh[t, 1, i, j] = b + theta * (b - v[t, 1, i, j])
                v[t, 0, i, j] = a
                v[t, 1, i, j] = b

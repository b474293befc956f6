"""Closed-form proximal maps, applied pointwise over space and time.

``prox_{a f}(x~) = argmin_x a f(x) + 0.5 |x - x~|^2``. Vector-valued maps take
the component axis as an argument so the same code handles stacked fields of
any layout and d = 2 or 3.
"""

import numpy as np


def prox_nonneg_quad(alpha, z, x_tilde):
    """Prox of ``alpha * (chi_+(x) + 0.5 (x - z)^2)``.

    ``alpha`` may be an array (diagonal preconditioning) broadcast against ``z``.
    """
    alpha = np.asarray(alpha, dtype=float)
    return np.maximum(0.0, (alpha * z + x_tilde) / (alpha + 1.0))


def prox_flow_quad(alpha, z, c, x_tilde, axis=0):
    """Prox of ``alpha * 0.5 (z + c . x)^2`` for d-vectors along ``axis``.

    Solves ``(I + alpha c c^T) x = x~ - alpha c z``. By Sherman-Morrison the
    solution is ``x~ - alpha c (z + c . x~) / (1 + alpha |c|^2)``.
    """
    c = np.asarray(c, dtype=float)
    x_tilde = np.asarray(x_tilde, dtype=float)
    z = np.asarray(z, dtype=float)
    cx = np.sum(c * x_tilde, axis=axis)
    cc = np.sum(c * c, axis=axis)
    scale = np.asarray(alpha, dtype=float) * (z + cx) / (1.0 + alpha * cc)
    return x_tilde - c * np.expand_dims(scale, axis)


def _norm(y, axis):
    return np.sqrt(np.sum(y * y, axis=axis, keepdims=True))


def prox_tv_shrink(alpha, y_tilde, axis=0):
    """Block soft-thresholding, the prox of ``alpha * |y|_2``."""
    y_tilde = np.asarray(y_tilde, dtype=float)
    n = _norm(y_tilde, axis)
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = np.where(n > 0, np.maximum(n - alpha, 0.0) / n, 0.0)
    return y_tilde * factor


def prox_tv_dual_project(alpha, y_tilde, axis=0):
    """Projection onto the l2 ball of radius ``alpha``.

    This is the prox of the conjugate of ``alpha * |y|_2`` for any step size.
    ``alpha = 0`` maps everything to 0.
    """
    y_tilde = np.asarray(y_tilde, dtype=float)
    if np.all(np.asarray(alpha) == 0):
        return np.zeros_like(y_tilde)
    n = _norm(y_tilde, axis)
    return y_tilde / np.maximum(1.0, n / alpha)


def prox_quad_conjugate(gamma, nu, y_tilde):
    """Prox with step ``nu`` of ``y^2 / (2 gamma)``, the conjugate of ``gamma/2 y^2``.

    ``gamma = 0`` is the indicator of {0}, so the result is 0.
    """
    nu = np.asarray(nu, dtype=float)
    if gamma == 0:
        return np.zeros(np.broadcast(nu, y_tilde).shape)
    return gamma / (gamma + nu) * np.asarray(y_tilde, dtype=float)

"""Objective functions of the joint reconstruction / motion estimation model."""

import numpy as np

from ._validation import check_image_seq, check_motion_seq, check_same_shape
from .diffops import TransportOperator, grad_fwd


def tv(u):
    """Isotropic total variation ``sum |grad_fwd u|_2`` over all leading axes."""
    g = grad_fwd(u)
    return float(np.sum(np.sqrt(np.sum(g * g, axis=-3))))


def flow_tv(v):
    """Sum of the isotropic TV of each motion component."""
    return tv(np.asarray(v, dtype=float))


def motion_misfit(p, v):
    """``0.5 * sum_t |p_{t+1} - p_t + grad_central(p_t) . v_t|^2``."""
    r = TransportOperator(v).apply(p)
    return 0.5 * float(np.sum(r * r))


def regularizer(p, v, alpha, beta, gamma):
    out = 0.0
    if alpha:
        out += alpha * tv(p)
    if beta:
        out += beta * flow_tv(v)
    if gamma:
        out += gamma * motion_misfit(p, v)
    return out


def denoising_energy(p, v, p_tilde, params):
    """Energy of the proximal (denoising) problem.

    ``sum_t 0.5 |p_t - p~_t|^2 + eta*alpha TV(p_t) + eta*beta TV(v_t)
    + eta*gamma/2 |D_v p|^2``.
    """
    p = check_image_seq(p)
    p_tilde = check_image_seq(p_tilde, "p_tilde")
    check_same_shape(p, p_tilde, ("p", "p_tilde"))
    v = check_motion_seq(v, p.shape)
    a, b, g = params.scaled()
    return 0.5 * float(np.sum((p - p_tilde) ** 2)) + regularizer(p, v, a, b, g)


def data_misfit(p, data, sched, fwd):
    """``sum_t 0.5 |C_t A p_t - f_t|^2`` and the residual blocks."""
    resid = fwd.forward_frames(p, sched) - data.blocks
    return 0.5 * float(np.sum(resid * resid)), resid


def total_energy(p, v, data, sched, fwd, params):
    """Full objective with the data term; the last frame has no motion term."""
    p = check_image_seq(p)
    v = check_motion_seq(v, p.shape)
    if data.blocks.shape[0] != p.shape[0]:
        raise ValueError(f"{data.blocks.shape[0]} data frames for {p.shape[0]} image frames")
    misfit, _ = data_misfit(p, data, sched, fwd)
    return misfit + regularizer(p, v, params.alpha, params.beta, params.gamma)


def p_subproblem_energy(p, p_tilde, transport, alpha_t, gamma_t):
    """Image update objective with the motion field frozen inside ``transport``."""
    e = 0.5 * float(np.sum((p - p_tilde) ** 2))
    if alpha_t:
        e += alpha_t * tv(p)
    if gamma_t:
        r = transport.apply(p)
        e += 0.5 * gamma_t * float(np.sum(r * r))
    return e


def v_subproblem_energy(v, p, beta_t, gamma_t):
    """Motion update objective with the image sequence frozen."""
    e = beta_t * flow_tv(v) if beta_t else 0.0
    if gamma_t:
        e += gamma_t * motion_misfit(p, v)
    return e

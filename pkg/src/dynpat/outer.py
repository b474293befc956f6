"""Accelerated proximal gradient (FISTA with restart) around the ACS prox step.

Forward step, per frame::

    p~_t = y_t - eta A^T C_t^T (C_t A y_t - f_t)

Backward step: the joint denoising problem for ``p~`` solved by
:func:`dynpat.acs.acs_solve`. The iterate starts at ``p = 0`` and
``eta = eta_factor / max_t L_t``. Whenever the total energy would increase,
the momentum is reset and the step is redone from the last accepted iterate;
if that still fails the iterate is kept, so the recorded energy never
increases.

Sensor data at the extrapolated point is obtained from the cached data of the
last two iterates, so each iteration costs one forward and one adjoint
application.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .acs import AcsState, acs_solve
from .energy import regularizer
from .grid import EnergyTrace, RegParams
from .wave import estimate_lipschitz_frames

log = logging.getLogger(__name__)


@dataclass
class FistaState:
    """Iterate, momentum and energy history of one reconstruction run."""

    p: np.ndarray
    v: np.ndarray
    y: np.ndarray
    t: float = 1.0
    eta: float = 1.0
    lipschitz: np.ndarray = None
    energies: list = field(default_factory=list)
    restarts: int = 0
    stalls: int = 0
    iteration: int = 0
    trace: EnergyTrace = field(default_factory=EnergyTrace)
    acs: AcsState = None


def _total(resid, p, v, params):
    return 0.5 * float(np.sum(resid * resid)) + regularizer(p, v, params.alpha, params.beta,
                                                             params.gamma)


def fista_reconstruct(data, sched, fwd, params, backend_p="pdhg", backend_v="pdhg",
                      iters=20, alternations=4, eta_factor=1.5, lipschitz=None,
                      p_config=None, v_config=None, callback=None, lipschitz_iters=30,
                      seed=0):
    """Joint image and motion reconstruction from sub-sampled data.

    Parameters
    ----------
    data : DataSeq
        Blocks ``(T, M_c, n_tau)`` read according to ``sched``.
    sched : SamplingSchedule
    fwd : WaveOperator or ExplicitWaveOperator
    params : RegParams
        ``alpha, beta, gamma``; ``eta`` is overwritten by the step size.
    backend_p, backend_v : {'pdhg', 'admm'}
    iters : int
        Outer iterations.
    alternations : int
        ACS rounds per prox step.
    lipschitz : array, optional
        Per-frame ``L_t``; estimated by power iteration when omitted.
    callback : callable, optional
        ``callback(i, p, v)`` after every outer iteration.

    Returns
    -------
    p, v, state : ImageSeq, MotionSeq, FistaState
    """
    f = data.blocks
    T = f.shape[0]
    frames = list(range(T))
    shape = (T,) + fwd.grid.shape
    if lipschitz is None:
        lipschitz = estimate_lipschitz_frames(fwd, sched, frames, iters=lipschitz_iters, seed=seed)
    lipschitz = np.asarray(lipschitz, dtype=float)
    eta = eta_factor / float(np.max(lipschitz))
    prox_params = RegParams(params.alpha, params.beta, params.gamma, eta)

    p = np.zeros(shape)
    v = np.zeros((T, 2) + fwd.grid.shape)
    state = FistaState(p=p, v=v, y=p.copy(), eta=eta, lipschitz=lipschitz)
    state.acs = AcsState.initial(p, v, backend_p, backend_v, p_config, v_config)
    Ap = fwd.forward_frames(p, sched, frames)
    Ap_prev = Ap
    E = _total(Ap - f, p, v, params)
    state.energies.append(E)
    state.trace.record("E", E)
    p_prev = p

    for i in range(1, iters + 1):
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * state.t ** 2))
        beta = (state.t - 1.0) / t_next
        momentum = beta != 0.0
        for attempt in range(2):
            if momentum:
                y = state.p + beta * (state.p - p_prev)
                Ay = Ap + beta * (Ap - Ap_prev)
            else:
                y, Ay = state.p, Ap
            p_tilde = y - eta * fwd.adjoint_frames(Ay - f, sched, frames)
            acs = state.acs
            acs.p, acs.v = state.p.copy(), state.v.copy()
            p_new, v_new, _ = acs_solve(p_tilde, acs, prox_params, alternations=alternations,
                                        trace=state.trace)
            Ap_new = fwd.forward_frames(p_new, sched, frames)
            E_new = _total(Ap_new - f, p_new, v_new, params)
            if E_new <= E or not momentum:
                break
            state.restarts += 1
            state.t, t_next, beta, momentum = 1.0, 1.0, 0.0, False
        if E_new <= E:
            p_prev, Ap_prev = state.p, Ap
            state.p, state.v, Ap, E = p_new, v_new, Ap_new, E_new
            state.t = t_next
        else:
            state.stalls += 1
            state.t = 1.0
            p_prev, Ap_prev = state.p, Ap
            log.debug("outer iteration %d kept previous iterate", i)
        state.iteration = i
        state.energies.append(E)
        state.trace.record("E", E)
        if callback is not None:
            callback(i, state.p, state.v)
    state.y = state.p
    return state.p, state.v, state


def fbf_reconstruct(data, sched, fwd, alpha=0.0, mode="TV", iters=100, backend_p="pdhg",
                    **kw):
    """Frame-by-frame reconstruction with nonnegativity (``NNLS``) or TV + nonnegativity.

    Frames couple only through the shared step size and restart test, so the
    result equals :func:`fista_reconstruct` with ``beta = gamma = 0``.
    """
    mode = mode.upper()
    if mode not in ("NNLS", "TV"):
        raise ValueError(f"mode must be 'NNLS' or 'TV', got {mode!r}")
    a = float(alpha) if mode == "TV" else 0.0
    p, _, state = fista_reconstruct(data, sched, fwd, RegParams(a, 0.0, 0.0), backend_p=backend_p,
                                    backend_v="pdhg", iters=iters, **kw)
    return p, state


__all__ = ["FistaState", "fbf_reconstruct", "fista_reconstruct"]

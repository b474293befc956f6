"""Alternate convex search for the bi-convex denoising problem.

Each alternation runs an image update with the motion frozen, then a motion
update with the images frozen. A candidate is accepted only if it strictly
lowers the denoising energy; otherwise the sub-solver keeps iterating from
its warm state with a doubled budget, and at the cap the previous block is
kept. Sub-solver objects persist in :class:`AcsState` so every call resumes
from the variables of the previous one.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_image_seq, check_motion_seq
from .admm import AdmmConfig, AdmmFlowSolver, AdmmImageSolver, flow_config
from .energy import denoising_energy
from .pdhg import PdhgConfig, PdhgFlowSolver, PdhgImageSolver

log = logging.getLogger(__name__)

BACKENDS = ("pdhg", "admm")


def make_p_solver(backend, config=None):
    if backend == "pdhg":
        return PdhgImageSolver(config or PdhgConfig())
    if backend == "admm":
        return AdmmImageSolver(config or AdmmConfig())
    raise ValueError(f"unknown p backend {backend!r}; expected one of {BACKENDS}")


def make_v_solver(backend, config=None):
    if backend == "pdhg":
        return PdhgFlowSolver(config or PdhgConfig(preconditioned=False))
    if backend == "admm":
        return AdmmFlowSolver(config or flow_config())
    raise ValueError(f"unknown v backend {backend!r}; expected one of {BACKENDS}")


@dataclass
class AcsState:
    """Current iterate, warm-startable sub-solvers and accepted-energy history."""

    p: np.ndarray
    v: np.ndarray
    p_solver: object = None
    v_solver: object = None
    energies: list = field(default_factory=list)
    alternations: int = 0
    rejected: int = 0

    @classmethod
    def initial(cls, p, v=None, backend_p="pdhg", backend_v="pdhg", p_config=None, v_config=None):
        p = check_image_seq(p).copy()
        v = check_motion_seq(v, p.shape).copy()
        return cls(p=p, v=v, p_solver=make_p_solver(backend_p, p_config),
                   v_solver=make_v_solver(backend_v, v_config))


def _guarded_update(solve, energy, current, e_cur, budget, max_doublings):
    # Returns (iterate, energy, accepted).
    for _ in range(max_doublings + 1):
        cand = solve(budget)
        e = energy(cand)
        if e < e_cur:
            return cand, e, True
        if e == e_cur:
            break
        budget *= 2
    return current, e_cur, False


def acs_solve(p_tilde, state, params, alternations=4, max_doublings=3, trace=None):
    """Run ``alternations`` rounds of image and motion updates.

    ``params`` holds the unscaled weights and the step ``eta``; the scaled
    weights enter the sub-problems. Returns ``(p, v, state)``.
    """
    if alternations < 1:
        raise ValueError("alternations must be >= 1")
    p_tilde = check_image_seq(p_tilde, "p_tilde")
    a, b, g = params.scaled()

    def energy(p, v):
        return denoising_energy(p, v, p_tilde, params)

    e_cur = energy(state.p, state.v)
    # the denoising target changes between calls, so the history is per call
    state.energies = [e_cur]
    ps, vs = state.p_solver, state.v_solver
    for _ in range(alternations):
        p_new, e_cur, ok = _guarded_update(
            lambda n: ps.solve(p_tilde, state.v, a, g, max_iters=n),
            lambda c: energy(c, state.v), state.p, e_cur,
            ps.config.max_iters, max_doublings)
        state.p = p_new
        state.rejected += not ok
        state.energies.append(e_cur)
        if trace is not None:
            trace.record("p-update", e_cur)
        if not ok:
            log.debug("image update kept previous iterate (E=%.6g)", e_cur)

        if g != 0:
            v_new, e_cur, ok = _guarded_update(
                lambda n: vs.solve(state.p, state.v, b, g, max_iters=n),
                lambda c: energy(state.p, c), state.v, e_cur,
                vs.config.max_iters, max_doublings)
            state.v = v_new
            state.rejected += not ok
            if not ok:
                log.debug("motion update kept previous iterate (E=%.6g)", e_cur)
        state.energies.append(e_cur)
        if trace is not None:
            trace.record("v-update", e_cur)
        state.alternations += 1
        if g == 0:
            # images and motion decouple; further rounds would repeat the same solve
            break
    return state.p, state.v, state

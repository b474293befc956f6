"""Reconstruction recipes: NNLS-fbf, TV-fbf and joint TVTVL2."""

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_image_seq
from .acs import make_v_solver
from .grid import EnergyTrace, RegParams
from .outer import fbf_reconstruct, fista_reconstruct
from .phantom import image_metrics

RECIPES = ("nnls", "tv_fbf", "tvtvl2")

# Manually chosen TV weights for the default 2D scenario.
ALPHA_CONVENTIONAL = 2e-3
ALPHA_RSP25 = 3.2e-4
DEFAULT_ITERS = {"nnls": 100, "tv_fbf": 100, "tvtvl2": 20}


def tvtvl2_params(alpha_hat, gamma=0.1):
    """``alpha = beta = alpha_hat`` with the given motion weight."""
    return RegParams(alpha_hat, alpha_hat, gamma)


@dataclass
class ReconResult:
    """Output of :func:`run_recipe`."""

    recipe: str
    p: np.ndarray
    v: np.ndarray = None
    params: RegParams = None
    trace: EnergyTrace = field(default_factory=EnergyTrace)
    energies: list = field(default_factory=list)
    metrics: dict = None
    info: dict = field(default_factory=dict)


def run_recipe(recipe, data, sched, fwd, params=None, backend_p="pdhg", backend_v="pdhg",
               iters=None, truth=None, **kw):
    """Dispatch a named reconstruction.

    ``params`` defaults to ``alpha = ALPHA_RSP25`` for ``tv_fbf`` and to
    :func:`tvtvl2_params` with ``ALPHA_RSP25`` and ``gamma = 0.1`` for
    ``tvtvl2``. Remaining keywords go to :func:`fista_reconstruct`.
    If ``truth`` is given, image metrics are attached.
    """
    if recipe not in RECIPES:
        raise ValueError(f"unknown recipe {recipe!r}; expected one of {RECIPES}")
    iters = DEFAULT_ITERS[recipe] if iters is None else int(iters)
    v = None
    if recipe == "nnls":
        params = RegParams()
        p, state = fbf_reconstruct(data, sched, fwd, mode="NNLS", iters=iters,
                                   backend_p=backend_p, **kw)
    elif recipe == "tv_fbf":
        params = params or RegParams(ALPHA_RSP25)
        p, state = fbf_reconstruct(data, sched, fwd, alpha=params.alpha, mode="TV", iters=iters,
                                   backend_p=backend_p, **kw)
    else:
        params = params or tvtvl2_params(ALPHA_RSP25)
        p, v, state = fista_reconstruct(data, sched, fwd, params, backend_p=backend_p,
                                        backend_v=backend_v, iters=iters, **kw)
    result = ReconResult(recipe, p, v, params, state.trace, list(state.energies))
    result.info = {"eta": state.eta, "restarts": state.restarts, "stalls": state.stalls,
                   "iterations": state.iteration, "backend_p": backend_p,
                   "backend_v": backend_v if recipe == "tvtvl2" else None,
                   "lipschitz_max": float(np.max(state.lipschitz))}
    if truth is not None:
        result.metrics = image_metrics(p, truth)
    return result


def reference_flow(p_truth, beta=1e-6, gamma=1.0, backend="admm", max_iters=None, config=None):
    """Motion field from a single motion update on the true images."""
    p_truth = check_image_seq(p_truth, "p_truth")
    T, ny, nx = p_truth.shape
    solver = make_v_solver(backend, config)
    return solver.solve(p_truth, np.zeros((T, 2, ny, nx)), beta, gamma, max_iters=max_iters)

"""scikit-learn style wrappers around the functional API.

``fit`` prepares operator-dependent quantities (step sizes), ``transform``
runs the reconstruction or estimation on new input. Hyperparameters live in
``__init__`` so ``get_params``/``set_params``/``clone`` work as usual.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_image_seq, check_motion_seq
from .acs import AcsState, acs_solve, make_v_solver
from .diffops import grad_central
from .grid import DataSeq, RegParams
from .outer import fista_reconstruct
from .sampling import SamplingSchedule
from .wave import estimate_lipschitz_frames


def _as_data(X):
    if isinstance(X, DataSeq):
        return X
    X = np.asarray(X, dtype=float)
    if X.ndim == 2:
        X = X[None]
    return DataSeq(X)


class _ReconstructorBase(TransformerMixin, BaseEstimator):
    def _schedule(self, n_frames):
        if self.schedule is not None:
            return self.schedule
        return SamplingSchedule.full(self.operator.n_sensors, n_frames)

    def fit(self, X, y=None):
        """Estimate the per-frame Lipschitz constants for the frames in ``X``."""
        if self.operator is None:
            raise ValueError("operator must be set before fitting")
        data = _as_data(X)
        sched = self._schedule(data.n_frames)
        self.lipschitz_ = estimate_lipschitz_frames(self.operator, sched, range(data.n_frames),
                                                    iters=self.lipschitz_iters,
                                                    seed=self.random_state)
        self.n_frames_ = data.n_frames
        return self

    def _run(self, X, params, backend_v):
        check_is_fitted(self, "lipschitz_")
        data = _as_data(X)
        if data.n_frames != self.n_frames_:
            raise ValueError(f"fitted for {self.n_frames_} frames, got {data.n_frames}")
        p, v, state = fista_reconstruct(
            data, self._schedule(data.n_frames), self.operator, params,
            backend_p=self.backend_p, backend_v=backend_v, iters=self.n_iter,
            alternations=self.alternations, eta_factor=self.eta_factor,
            lipschitz=self.lipschitz_)
        self.motion_ = v
        self.energies_ = np.asarray(state.energies)
        self.trace_ = state.trace
        return p


class TVTVL2Reconstructor(_ReconstructorBase):
    """Joint image reconstruction and motion estimation from sensor data.

    Parameters
    ----------
    operator : WaveOperator or ExplicitWaveOperator
    schedule : SamplingSchedule, optional
        Sensors read per frame; all sensors when omitted.
    alpha, beta, gamma : float
        Image TV, motion TV and optical-flow weights.
    n_iter : int
        Outer accelerated proximal gradient iterations.

    Attributes
    ----------
    lipschitz_ : ndarray of shape (T,)
    motion_ : ndarray of shape (T, 2, ny, nx)
        Motion of the last ``transform`` call.
    energies_ : ndarray
        Total energy after each outer iteration of the last call.
    """

    def __init__(self, operator=None, schedule=None, alpha=3.2e-4, beta=3.2e-4, gamma=0.1,
                 backend_p="pdhg", backend_v="pdhg", n_iter=20, alternations=4,
                 eta_factor=1.5, lipschitz_iters=30, random_state=0):
        self.operator = operator
        self.schedule = schedule
        self.alpha = alpha
        self.beta = beta
        self.gamma = gamma
        self.backend_p = backend_p
        self.backend_v = backend_v
        self.n_iter = n_iter
        self.alternations = alternations
        self.eta_factor = eta_factor
        self.lipschitz_iters = lipschitz_iters
        self.random_state = random_state

    def transform(self, X):
        """Reconstruct images ``(T, ny, nx)`` from data blocks ``(T, M_c, n_tau)``."""
        return self._run(X, RegParams(self.alpha, self.beta, self.gamma), self.backend_v)


class FrameByFrameReconstructor(_ReconstructorBase):
    """Independent-frame reconstruction with nonnegativity and optional TV.

    ``mode='NNLS'`` ignores ``alpha``.
    """

    def __init__(self, operator=None, schedule=None, mode="TV", alpha=3.2e-4,
                 backend_p="pdhg", n_iter=100, eta_factor=1.5, lipschitz_iters=30,
                 random_state=0):
        self.operator = operator
        self.schedule = schedule
        self.mode = mode
        self.alpha = alpha
        self.backend_p = backend_p
        self.n_iter = n_iter
        self.eta_factor = eta_factor
        self.lipschitz_iters = lipschitz_iters
        self.random_state = random_state

    alternations = 1

    def transform(self, X):
        mode = self.mode.upper()
        if mode not in ("NNLS", "TV"):
            raise ValueError(f"mode must be 'NNLS' or 'TV', got {self.mode!r}")
        alpha = self.alpha if mode == "TV" else 0.0
        return self._run(X, RegParams(alpha, 0.0, 0.0), "pdhg")


class OpticalFlowEstimator(TransformerMixin, BaseEstimator):
    """TV-regularized optical flow between consecutive frames of an image sequence.

    ``transform`` maps images ``(T, ny, nx)`` to motion ``(T, 2, ny, nx)``
    in pixels per frame; the last frame is zero.
    """

    def __init__(self, beta=1e-2, gamma=1.0, backend="admm", max_iter=None):
        self.beta = beta
        self.gamma = gamma
        self.backend = backend
        self.max_iter = max_iter

    def fit(self, X, y=None):
        X = check_image_seq(X, "X")
        self.flow_ = self.transform(X)
        return self

    def transform(self, X):
        X = check_image_seq(X, "X")
        solver = make_v_solver(self.backend)
        return solver.solve(X, np.zeros((len(X), 2) + X.shape[1:]), self.beta, self.gamma,
                            max_iters=self.max_iter)

    def predict(self, X):
        """Warp each frame by its flow to predict the next frame (linearized)."""
        X = check_image_seq(X, "X")
        v = self.transform(X)
        return X[:-1] - np.einsum("tcij,tcij->tij", grad_central(X[:-1]), v[:-1])


class TVTVL2Denoiser(TransformerMixin, BaseEstimator):
    """Joint denoising and motion estimation of an image sequence.

    Minimizes ``0.5|p - X|^2 + alpha TV(p) + beta TV(v) + gamma/2 |D_v p|^2``
    over ``p >= 0`` and ``v`` by alternate convex search.
    """

    def __init__(self, alpha=0.05, beta=0.05, gamma=1.0, backend_p="pdhg", backend_v="pdhg",
                 alternations=4):
        self.alpha = alpha
        self.beta = beta
        self.gamma = gamma
        self.backend_p = backend_p
        self.backend_v = backend_v
        self.alternations = alternations

    def fit(self, X, y=None):
        self.transform(X)
        return self

    def transform(self, X, v_init=None):
        X = check_image_seq(X, "X")
        v0 = check_motion_seq(v_init, X.shape)
        state = AcsState.initial(np.maximum(X, 0.0), v0, self.backend_p, self.backend_v)
        p, v, state = acs_solve(X, state, RegParams(self.alpha, self.beta, self.gamma),
                                alternations=self.alternations)
        self.motion_ = v
        self.energies_ = np.asarray(state.energies)
        return p

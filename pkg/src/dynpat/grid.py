"""Shared domain types: acoustic grid, data sequences, parameters, energy traces."""

import time
from dataclasses import dataclass, field, replace

import numpy as np

from ._validation import check_finite, check_nonnegative, check_positive


@dataclass(frozen=True)
class Grid2D:
    """Square-pixel computational grid for the 2D acoustic forward model.

    Parameters
    ----------
    nx, ny : int
        Pixel counts along x (columns) and y (rows).
    dx : float
        Pixel pitch in meters.
    c : float
        Homogeneous sound speed in m/s.
    n_tau : int
        Number of recorded acoustic time steps.
    d_tau : float
        Acoustic time step in seconds.
    damping_width : int
        Width in pixels of the absorbing band added around the domain.
    damping_coeff : float
        Per-step damping strength inside the band.
    """

    nx: int = 100
    ny: int = 100
    dx: float = 2e-4
    c: float = 1500.0
    n_tau: int = 472
    d_tau: float = 40e-9
    damping_width: int = 20
    damping_coeff: float = 0.0

    def __post_init__(self):
        for name in ("nx", "ny", "n_tau"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        check_positive(self.dx, "dx")
        check_positive(self.c, "c")
        check_positive(self.d_tau, "d_tau")
        check_nonnegative(self.damping_coeff, "damping_coeff")
        if self.damping_width < 0:
            raise ValueError("damping_width must be >= 0")
        if self.cfl > 1.0:
            raise ValueError(f"CFL number {self.cfl:.3g} exceeds 1")
        if self.damping_width > 0 and not self.damping_width < min(self.nx, self.ny) / 4:
            raise ValueError("damping_width must be < min(nx, ny) / 4")

    @property
    def cfl(self):
        return self.c * self.d_tau / self.dx

    @property
    def shape(self):
        return (self.ny, self.nx)

    @property
    def n_pixels(self):
        return self.nx * self.ny

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True)
class RegParams:
    """Regularization weights (alpha, beta, gamma) and outer step size eta."""

    alpha: float = 0.0
    beta: float = 0.0
    gamma: float = 0.0
    eta: float = 1.0

    def __post_init__(self):
        check_nonnegative(self.alpha, "alpha")
        check_nonnegative(self.beta, "beta")
        check_nonnegative(self.gamma, "gamma")
        check_positive(self.eta, "eta")

    def scaled(self):
        """Weights (eta*alpha, eta*beta, eta*gamma) of the denoising problem."""
        return self.eta * self.alpha, self.eta * self.beta, self.eta * self.gamma

    def with_eta(self, eta):
        return replace(self, eta=eta)


@dataclass
class DataSeq:
    """Sub-sampled (or full) sensor data, one (M_c, M_tau) block per frame."""

    blocks: np.ndarray
    sigma: float = 0.0

    def __post_init__(self):
        self.blocks = check_finite(self.blocks, "data blocks")
        if self.blocks.ndim != 3:
            raise ValueError("data blocks must have shape (T, M_c, M_tau)")

    @property
    def n_frames(self):
        return self.blocks.shape[0]

    def __getitem__(self, t):
        return self.blocks[t]


@dataclass
class EnergyTrace:
    """Append-only log of (seconds since start, label, energy) records."""

    records: list = field(default_factory=list)
    _t0: float = field(default_factory=time.perf_counter, repr=False)

    def record(self, label, energy):
        self.records.append((time.perf_counter() - self._t0, str(label), float(energy)))

    def energies(self, label=None):
        return np.array([e for _, lab, e in self.records if label is None or lab == label])

    def extend(self, other, prefix=""):
        # Keeps timestamps nondecreasing by re-basing onto this trace's clock.
        now = time.perf_counter() - self._t0
        last = self.records[-1][0] if self.records else 0.0
        for _, lab, e in other.records:
            self.records.append((max(now, last), prefix + lab, e))

    def __len__(self):
        return len(self.records)

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("seconds,label,energy\n")
            for s, lab, e in self.records:
                fh.write(f"{s:.6f},{lab},{e:.17g}\n")

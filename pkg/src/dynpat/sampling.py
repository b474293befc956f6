"""Per-frame sensor sub-sampling (compression) operators."""

import json
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SamplingSchedule:
    """Sensor subsets ``S_t`` read in each frame of one period.

    ``subsets[i]`` holds zero-based sensor indices; frame ``t`` uses
    ``subsets[t % period]``.
    """

    n_sensors: int
    subsets: tuple

    def __post_init__(self):
        subsets = tuple(np.asarray(s, dtype=np.int64) for s in self.subsets)
        if not subsets:
            raise ValueError("schedule needs at least one frame")
        for s in subsets:
            if s.ndim != 1 or s.size == 0:
                raise ValueError("each subset must be a nonempty 1D index list")
            if s.min() < 0 or s.max() >= self.n_sensors:
                raise ValueError("sensor index out of range")
            if np.unique(s).size != s.size:
                raise ValueError("sensor indices within a frame must be distinct")
        object.__setattr__(self, "subsets", subsets)

    @property
    def period(self):
        return len(self.subsets)

    def indices(self, t):
        if t < 0:
            raise ValueError("frame index must be >= 0")
        return self.subsets[t % self.period]

    def n_selected(self, t):
        return self.indices(t).size

    def to_json(self):
        return json.dumps(
            {"n_sensors": int(self.n_sensors), "subsets": [s.tolist() for s in self.subsets]}
        )

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        return cls(int(doc["n_sensors"]), tuple(doc["subsets"]))

    @classmethod
    def full(cls, n_sensors, n_frames=1):
        return cls(n_sensors, tuple(np.arange(n_sensors) for _ in range(n_frames)))


def make_rsp_schedule(n_sensors, sub_factor, seed=0):
    """Random disjoint partition of the sensors into ``sub_factor`` frames."""
    if sub_factor < 1 or n_sensors % sub_factor:
        raise ValueError(f"{n_sensors} sensors are not divisible by factor {sub_factor}")
    perm = np.random.default_rng(seed).permutation(n_sensors)
    m_c = n_sensors // sub_factor
    return SamplingSchedule(
        n_sensors, tuple(np.sort(perm[i * m_c:(i + 1) * m_c]) for i in range(sub_factor))
    )


def apply_C(sched, t, f_full):
    """Select the sensor rows of frame ``t`` from full ``(M, M_tau)`` data."""
    f_full = np.asarray(f_full, dtype=float)
    if f_full.shape[0] != sched.n_sensors:
        raise ValueError(f"expected {sched.n_sensors} sensor rows, got {f_full.shape[0]}")
    return f_full[sched.indices(t)]


def apply_C_adjoint(sched, t, g):
    """Zero-fill the unselected rows; exact transpose of :func:`apply_C`."""
    g = np.asarray(g, dtype=float)
    idx = sched.indices(t)
    if g.shape[0] != idx.size:
        raise ValueError(f"expected {idx.size} rows, got {g.shape[0]}")
    out = np.zeros((sched.n_sensors,) + g.shape[1:])
    out[idx] = g
    return out

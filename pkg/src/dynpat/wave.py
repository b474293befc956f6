"""2D photoacoustic forward operator and its exact discrete adjoint.

The initial-value problem ``(d_tt - c^2 Lap) u = 0``, ``u(0) = p0``,
``d_t u(0) = 0`` is stepped with the exact-dispersion k-space recurrence

    u[n+1] = 2 u[n] - u[n-1] + IFFT(-4 sin^2(c |k| dt / 2) FFT(u[n]))

on a zero-padded periodic grid. By default the padding is wide enough that no
wave can leave the domain, wrap around the periodic box and reach a sensor
within ``n_tau`` steps. An optional absorbing band of ``damping_width`` pixels
multiplies the fields by ``exp(-coeff * ramp^2)`` every step.
With the damping written as a diagonal ``D`` the full scheme is

    u[0] = p0,  u[1] = D (I + L/2) p0,  u[n+1] = D (2I + L) u[n] - D^2 u[n-1]

and the adjoint runs the transposed recurrence backwards in time.
"""

import hashlib
import json
import os

import numpy as np
import scipy.fft as sfft

from ._validation import check_finite
from .grid import Grid2D
from .sampling import SamplingSchedule

# Extra pixels beyond the acoustic travel distance; covers the small
# non-causal tails of the spectral propagator.
_WRAP_MARGIN = 8


def default_sensor_pixels(grid, n_sensors):
    """Sensors evenly spaced on the top edge and the left edge of the domain.

    The corner pixel is skipped; the top edge receives the extra sensor when
    ``n_sensors`` is odd. Returns an integer array of (row, col) pairs.
    """
    n_top = (n_sensors + 1) // 2
    n_left = n_sensors - n_top
    if n_top > grid.nx - 1 or n_left > grid.ny - 1:
        raise ValueError(f"cannot place {n_sensors} sensors on a {grid.ny}x{grid.nx} grid")
    cols = np.round(np.linspace(1, grid.nx - 1, n_top)).astype(int) if n_top else []
    rows = np.round(np.linspace(1, grid.ny - 1, n_left)).astype(int) if n_left else []
    top = [(0, c) for c in cols]
    left = [(r, 0) for r in rows]
    pix = np.array(top + left, dtype=np.int64).reshape(-1, 2)
    if len({tuple(x) for x in pix}) != len(pix):
        raise ValueError("sensor positions collide; use fewer sensors")
    return pix


class WaveOperator:
    """Linear map from initial pressure images to sensor time series.

    Parameters
    ----------
    grid : Grid2D
    sensor_pixels : array of (row, col), optional
        Defaults to :func:`default_sensor_pixels` with ``n_sensors`` sensors.
    n_sensors : int
        Used only when ``sensor_pixels`` is None.
    workers : int, optional
        Thread count handed to ``scipy.fft``.
    wrap_free : bool
        Pad far enough that periodic wrap-around cannot reach the sensors
        within the recorded time window.

    Inputs may be a single image ``(ny, nx)`` or a batch ``(B, ny, nx)``;
    outputs are ``(M, n_tau)`` or ``(B, M, n_tau)`` correspondingly.
    """

    def __init__(self, grid, sensor_pixels=None, n_sensors=100, workers=None, wrap_free=True):
        if not isinstance(grid, Grid2D):
            raise TypeError("grid must be a Grid2D")
        self.grid = grid
        if sensor_pixels is None:
            sensor_pixels = default_sensor_pixels(grid, n_sensors)
        sensor_pixels = np.asarray(sensor_pixels, dtype=np.int64).reshape(-1, 2)
        if (sensor_pixels[:, 0].min() < 0 or sensor_pixels[:, 0].max() >= grid.ny
                or sensor_pixels[:, 1].min() < 0 or sensor_pixels[:, 1].max() >= grid.nx):
            raise ValueError("sensor pixel outside the grid")
        self.sensor_pixels = sensor_pixels
        self.workers = workers

        w = grid.damping_width
        self._offset = w
        travel = grid.cfl * grid.n_tau + _WRAP_MARGIN if wrap_free else 0.0
        self._pshape = tuple(
            sfft.next_fast_len(int(max(n + 2 * w, np.ceil(n - 1 + travel))), real=True)
            for n in (grid.ny, grid.nx)
        )
        Py, Px = self._pshape
        ky = 2 * np.pi * sfft.fftfreq(Py, d=grid.dx)
        kx = 2 * np.pi * sfft.rfftfreq(Px, d=grid.dx)
        kabs = np.sqrt(ky[:, None] ** 2 + kx[None, :] ** 2)
        # Spectral symbol of L; real and even in k, so L is symmetric.
        self._symbol = -4.0 * np.sin(0.5 * grid.c * kabs * grid.d_tau) ** 2
        self._damp = self._damping_mask()
        self._damp2 = self._damp ** 2
        rows = sensor_pixels[:, 0] + w
        cols = sensor_pixels[:, 1] + w
        self._flat_sensors = rows * Px + cols

    @property
    def n_sensors(self):
        return len(self.sensor_pixels)

    @property
    def data_shape(self):
        return (self.n_sensors, self.grid.n_tau)

    def _damping_mask(self):
        g = self.grid
        w = g.damping_width
        Py, Px = self._pshape
        if w == 0 or g.damping_coeff == 0:
            return np.ones(self._pshape)

        def ramp(n_pad, n_dom):
            idx = np.arange(n_pad)
            # distance outside [w, w + n_dom - 1] on the periodic padded axis
            before = (w - idx) % n_pad
            after = (idx - (w + n_dom - 1)) % n_pad
            dist = np.minimum(before, after).astype(float)
            inside = (idx >= w) & (idx < w + n_dom)
            dist[inside] = 0.0
            return np.minimum(dist / w, 1.0)

        ry = ramp(Py, g.ny)
        rx = ramp(Px, g.nx)
        return np.exp(-g.damping_coeff * (ry[:, None] ** 2 + rx[None, :] ** 2))

    def _L(self, u):
        return sfft.irfft2(self._symbol * sfft.rfft2(u, workers=self.workers),
                           s=self._pshape, workers=self.workers)

    def _pad(self, p):
        out = np.zeros(p.shape[:-2] + self._pshape)
        w = self._offset
        out[..., w:w + self.grid.ny, w:w + self.grid.nx] = p
        return out

    def _crop(self, u):
        w = self._offset
        return u[..., w:w + self.grid.ny, w:w + self.grid.nx]

    def _sample(self, u):
        return u.reshape(u.shape[:-2] + (-1,))[..., self._flat_sensors]

    def _inject(self, g):
        out = np.zeros(g.shape[:-1] + (self._pshape[0] * self._pshape[1],))
        out[..., self._flat_sensors] = g
        return out.reshape(g.shape[:-1] + self._pshape)

    def forward(self, p0):
        """Sensor data ``(..., M, n_tau)`` for initial pressure ``p0`` of shape ``(..., ny, nx)``."""
        p0 = check_finite(p0, "p0")
        if p0.shape[-2:] != self.grid.shape:
            raise ValueError(f"expected images of shape {self.grid.shape}, got {p0.shape}")
        n_tau = self.grid.n_tau
        out = np.empty(p0.shape[:-2] + (self.n_sensors, n_tau))
        u_prev = self._pad(p0)
        out[..., 0] = self._sample(u_prev)
        if n_tau == 1:
            return out
        u = self._damp * (u_prev + 0.5 * self._L(u_prev))
        out[..., 1] = self._sample(u)
        for n in range(2, n_tau):
            u_next = self._damp * (2.0 * u + self._L(u)) - self._damp2 * u_prev
            u_prev, u = u, u_next
            out[..., n] = self._sample(u)
        return out

    def adjoint(self, f):
        """Exact transpose of :meth:`forward`; ``f`` has shape ``(..., M, n_tau)``."""
        f = check_finite(f, "f")
        if f.shape[-2:] != self.data_shape:
            raise ValueError(f"expected data of shape {self.data_shape}, got {f.shape}")
        n_tau = self.grid.n_tau
        lam_next2 = None
        lam_next = None
        for n in range(n_tau - 1, 0, -1):
            lam = self._inject(f[..., n])
            if lam_next is not None:
                d = self._damp * lam_next
                lam += 2.0 * d + self._L(d)
            if lam_next2 is not None:
                lam -= self._damp2 * lam_next2
            lam_next2, lam_next = lam_next, lam
        lam0 = self._inject(f[..., 0])
        if lam_next is not None:
            d = self._damp * lam_next
            lam0 += d + 0.5 * self._L(d)
        if lam_next2 is not None:
            lam0 -= self._damp2 * lam_next2
        return np.ascontiguousarray(self._crop(lam0))

    def normal(self, p, sched=None, frames=None):
        """``A^T C_t^T C_t A p`` for a batch of frames (all sensors if ``sched`` is None)."""
        data = self.forward(p)
        if sched is not None:
            data = data * self.sensor_mask(sched, frames)[..., None]
        return self.adjoint(data)

    def forward_frames(self, p, sched, frames=None):
        """``C_t A p_t`` for every frame; returns ``(T, M_c, n_tau)``."""
        frames = range(len(p)) if frames is None else frames
        data = self.forward(p)
        return np.stack([data[i, sched.indices(t)] for i, t in enumerate(frames)])

    def adjoint_frames(self, g, sched, frames=None):
        """``A^T C_t^T g_t`` for every frame; inverse layout of :meth:`forward_frames`."""
        frames = range(len(g)) if frames is None else frames
        full = np.zeros((len(g),) + self.data_shape)
        for i, t in enumerate(frames):
            full[i, sched.indices(t)] = g[i]
        return self.adjoint(full)

    def sensor_rows(self, dtype=np.float32, batch=25):
        """Rows of ``A`` grouped by sensor: array ``(M, n_tau, ny, nx)``.

        Row ``(m, l)`` is ``A^T e_(m,l)``. All rows of one sensor come from a
        single backward recurrence because the scheme is time invariant after
        its first step, so the cost is one simulation per ``batch`` sensors.
        """
        M, n_tau = self.data_shape
        rows = np.empty((M, n_tau) + self.grid.shape, dtype=dtype)
        for start in range(0, M, batch):
            sel = np.arange(start, min(start + batch, M))
            inj = np.zeros((sel.size, M))
            inj[np.arange(sel.size), sel] = 1.0
            h = self._inject(inj)
            h_prev = None
            rows[sel, 0] = self._crop(h)
            for l in range(1, n_tau):
                d = self._damp * h
                Ld = self._L(d)
                row = d + 0.5 * Ld
                h_next = 2.0 * d + Ld
                if h_prev is not None:
                    q = self._damp2 * h_prev
                    row -= q
                    h_next -= q
                rows[sel, l] = self._crop(row)
                h_prev, h = h, h_next
        return rows

    def sensor_mask(self, sched, frames):
        """0/1 array ``(len(frames), M)`` marking the sensors read in each frame."""
        mask = np.zeros((len(frames), self.n_sensors))
        for i, t in enumerate(frames):
            mask[i, sched.indices(t)] = 1.0
        return mask


def estimate_lipschitz_frames(op, sched, frames, iters=30, seed=0):
    """Power iteration on ``A^T C_t^T C_t A`` for several frames at once.

    Returns one Rayleigh-quotient estimate per frame.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    frames = list(frames)
    if sched is None:
        sched = SamplingSchedule.full(op.n_sensors)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((len(frames),) + op.grid.shape)
    est = np.zeros(len(frames))
    for _ in range(iters):
        x /= np.sqrt(np.sum(x * x, axis=(-2, -1), keepdims=True))
        data = op.forward_frames(x, sched, frames)
        est = np.sum(data * data, axis=(-2, -1))
        x = op.adjoint_frames(data, sched, frames)
    return est


def estimate_lipschitz(op, sched, t, iters=30, seed=0):
    """Largest-eigenvalue estimate ``L_t`` of ``A^T C_t^T C_t A``."""
    return float(estimate_lipschitz_frames(op, sched, [t], iters=iters, seed=seed)[0])


class ExplicitWaveOperator:
    """Wave operator backed by precomputed sensor rows.

    Equivalent to :class:`WaveOperator` up to the storage precision of the
    rows (float32 by default) and much faster when only a few sensors are read
    per frame. Forward and adjoint use the same stored matrix, so they remain
    exact transposes of each other.
    """

    def __init__(self, op, dtype=np.float32, rows=None):
        self.grid = op.grid
        self.sensor_pixels = op.sensor_pixels
        self.base = op
        if rows is None:
            rows = op.sensor_rows(dtype=dtype)
        M, n_tau = op.data_shape
        self.rows = np.asarray(rows).reshape(M, n_tau, -1)
        self.dtype = self.rows.dtype

    @property
    def n_sensors(self):
        return self.base.n_sensors

    @property
    def data_shape(self):
        return self.base.data_shape

    def _frames_by_sensor(self, sched, frames):
        users = {}
        for i, t in enumerate(frames):
            for j, m in enumerate(sched.indices(t)):
                users.setdefault(int(m), []).append((i, j))
        return users

    def forward(self, p0):
        p0 = check_finite(p0, "p0")
        flat = p0.reshape(-1, self.grid.n_pixels).astype(self.dtype)
        out = np.einsum("mln,bn->bml", self.rows, flat, dtype=self.dtype)
        return out.astype(float).reshape(p0.shape[:-2] + self.data_shape)

    def adjoint(self, f):
        f = check_finite(f, "f")
        flat = f.reshape((-1,) + self.data_shape).astype(self.dtype)
        out = np.einsum("mln,bml->bn", self.rows, flat, dtype=self.dtype)
        return out.astype(float).reshape(f.shape[:-2] + self.grid.shape)

    def forward_frames(self, p, sched, frames=None):
        p = check_finite(p, "p")
        frames = list(range(len(p)) if frames is None else frames)
        flat = p.reshape(len(p), -1).astype(self.dtype)
        n_c = sched.n_selected(frames[0])
        out = np.zeros((len(p), n_c, self.grid.n_tau))
        for m, uses in self._frames_by_sensor(sched, frames).items():
            fi, ji = map(list, zip(*uses))
            out[fi, ji] = (self.rows[m] @ flat[fi].T).T
        return out

    def adjoint_frames(self, g, sched, frames=None):
        g = check_finite(g, "g")
        frames = list(range(len(g)) if frames is None else frames)
        out = np.zeros((len(g), self.grid.n_pixels))
        for m, uses in self._frames_by_sensor(sched, frames).items():
            fi, ji = map(list, zip(*uses))
            out[fi] += (self.rows[m].T @ g[fi, ji].T.astype(self.dtype)).T
        return out.reshape((len(g),) + self.grid.shape)

    def sensor_mask(self, sched, frames):
        return self.base.sensor_mask(sched, frames)


def explicit_operator(op, cache_dir=None, dtype=np.float32):
    """:class:`ExplicitWaveOperator` for ``op``, optionally cached on disk.

    The cache file name is a hash of the grid, sensor positions, padding and
    storage type, so a changed geometry never reuses stale rows.
    """
    if cache_dir is None:
        return ExplicitWaveOperator(op, dtype=dtype)
    key = json.dumps({"grid": op.grid.to_dict(), "sensors": op.sensor_pixels.tolist(),
                      "pad": list(op._pshape), "dtype": np.dtype(dtype).str}, sort_keys=True)
    name = "rows-" + hashlib.sha1(key.encode()).hexdigest()[:16] + ".npy"
    path = os.path.join(cache_dir, name)
    if os.path.exists(path):
        rows = np.load(path)
    else:
        os.makedirs(cache_dir, exist_ok=True)
        rows = op.sensor_rows(dtype=dtype)
        tmp = path + ".tmp.npy"
        np.save(tmp, rows)
        os.replace(tmp, path)
    return ExplicitWaveOperator(op, dtype=dtype, rows=rows)

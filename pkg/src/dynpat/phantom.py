"""Dynamic ellipse phantom, data simulation and image quality metrics."""

import json
from dataclasses import asdict, dataclass
from importlib import resources

import numpy as np

from ._validation import check_image_seq, check_nonnegative, check_same_shape
from .grid import DataSeq

_SUPERSAMPLE = 4


@dataclass(frozen=True)
class EllipseTrack:
    """Ellipse whose center, semi-axes and angle move linearly between two keyframes.

    Coordinates are in pixels ``(x, y)`` with x along columns; the angle is in
    radians. Frame ``t`` of ``T`` interpolates with weight ``t / (T - 1)``.
    """

    center_start: tuple
    center_end: tuple
    axes_start: tuple
    axes_end: tuple
    angle_start: float = 0.0
    angle_end: float = 0.0
    amplitude: float = 1.0

    def __post_init__(self):
        for name in ("center_start", "center_end", "axes_start", "axes_end"):
            val = tuple(float(x) for x in getattr(self, name))
            if len(val) != 2:
                raise ValueError(f"{name} needs two entries")
            object.__setattr__(self, name, val)
        if min(self.axes_start + self.axes_end) <= 0:
            raise ValueError("semi-axes must be positive")
        check_nonnegative(self.amplitude, "amplitude")

    def at(self, t, n_frames):
        """``(center, axes, angle)`` at frame ``t``."""
        s = t / (n_frames - 1) if n_frames > 1 else 0.0
        lerp = lambda a, b: tuple((1 - s) * np.asarray(a) + s * np.asarray(b))
        return (lerp(self.center_start, self.center_end), lerp(self.axes_start, self.axes_end),
                (1 - s) * self.angle_start + s * self.angle_end)

    @classmethod
    def static(cls, center, axes, angle=0.0, amplitude=1.0):
        return cls(center, center, axes, axes, angle, angle, amplitude)

    def to_dict(self):
        return asdict(self)


def _inside(xs, ys, center, axes, angle):
    c, s = np.cos(angle), np.sin(angle)
    dx, dy = xs - center[0], ys - center[1]
    u = (c * dx + s * dy) / axes[0]
    w = (-s * dx + c * dy) / axes[1]
    return u * u + w * w <= 1.0


def _bounding_radius(axes):
    return max(axes)


def make_dynamic_phantom(grid, tracks, n_frames):
    """Rasterize ellipse tracks into ``(T, ny, nx)`` with values in [0, 1].

    Pixels are 4x4 supersampled so partial coverage gives fractional values;
    overlapping ellipses add and the sum is clipped to [0, 1].
    """
    if n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    ny, nx = grid.shape
    out = np.zeros((n_frames, ny, nx))
    k = _SUPERSAMPLE
    sub = (np.arange(k) + 0.5) / k - 0.5
    ys = (np.arange(ny)[:, None] + sub[None, :]).ravel()
    xs = (np.arange(nx)[:, None] + sub[None, :]).ravel()
    X, Y = np.meshgrid(xs, ys)
    for tr in tracks:
        for t in range(n_frames):
            center, axes, angle = tr.at(t, n_frames)
            r = _bounding_radius(axes)
            if (center[0] - r < 0 or center[1] - r < 0
                    or center[0] + r > nx - 1 or center[1] + r > ny - 1):
                raise ValueError(f"ellipse track leaves the domain at frame {t}")
            mask = _inside(X, Y, center, axes, angle).astype(float)
            out[t] += tr.amplitude * mask.reshape(ny, k, nx, k).mean(axis=(1, 3))
    return np.clip(out, 0.0, 1.0)


def tracks_from_json(text):
    doc = json.loads(text)
    items = doc["tracks"] if isinstance(doc, dict) else doc
    return [EllipseTrack(**item) for item in items]


def tracks_to_json(tracks):
    return json.dumps({"tracks": [t.to_dict() for t in tracks]}, indent=2)


def default_tracks():
    """The three-tube configuration shipped with the package."""
    text = resources.files("dynpat").joinpath("data/default_tracks.json").read_text()
    return tracks_from_json(text)


def simulate_data(p, fwd, sched, sigma, seed=0):
    """Full and sub-sampled noisy data plus the mean per-frame SNR in dB.

    Returns ``(full, sub, snr_db)`` where ``full`` holds ``A p_t`` plus white
    noise of standard deviation ``sigma`` for every sensor and ``sub`` keeps
    the rows selected by ``sched`` (the same noise realization).
    """
    p = check_image_seq(p)
    check_nonnegative(sigma, "sigma")
    clean = fwd.forward(p)
    noise = np.random.default_rng(seed).standard_normal(clean.shape) * sigma
    noisy = clean + noise
    sub = np.stack([noisy[t, sched.indices(t)] for t in range(len(p))])
    rms = np.sqrt(np.mean(clean ** 2, axis=(-2, -1)))
    snr = float(np.mean(20.0 * np.log10(rms / sigma))) if sigma > 0 else np.inf
    return DataSeq(noisy, sigma), DataSeq(sub, sigma), snr


def image_metrics(p, truth):
    """Per-frame and mean relative L2 error and PSNR (peak = max of truth).

    Frames equal to the truth report ``inf`` PSNR.
    """
    p = check_image_seq(p)
    truth = check_image_seq(truth, "truth")
    check_same_shape(p, truth, ("p", "truth"))
    diff = (p - truth).reshape(len(p), -1)
    ref = truth.reshape(len(p), -1)
    norm_ref = np.linalg.norm(ref, axis=1)
    rel = np.linalg.norm(diff, axis=1) / np.where(norm_ref > 0, norm_ref, 1.0)
    mse = np.mean(diff ** 2, axis=1)
    peak = float(truth.max()) if truth.max() > 0 else 1.0
    with np.errstate(divide="ignore"):
        psnr = np.where(mse > 0, 10.0 * np.log10(peak ** 2 / np.where(mse > 0, mse, 1.0)), np.inf)
    return {
        "rel_l2": rel.tolist(),
        "psnr": psnr.tolist(),
        "mean_rel_l2": float(rel.mean()),
        "mean_psnr": float(np.mean(psnr)),
    }

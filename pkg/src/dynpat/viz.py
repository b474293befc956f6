"""Motion-field color coding and per-frame mean-motion removal."""

import numpy as np
from matplotlib.colors import hsv_to_rgb


def _hue(vx, vy):
    return (np.arctan2(vy, vx) % (2 * np.pi)) / (2 * np.pi)


def render_flow_colorwheel(v_t, border=4):
    """Color-code a 2D vector field ``(2, ny, nx)`` as an RGB uint8 image.

    The field is rescaled so its largest vector has norm 1. Direction sets the
    hue, the rescaled norm sets the saturation, and the value is 1, so a zero
    field renders white. A frame of ``border`` pixels shows, for every border
    pixel, the hue of the vector pointing from the image center to it. Image
    rows point along +y.
    """
    v_t = np.asarray(v_t, dtype=float)
    if v_t.ndim != 3 or v_t.shape[0] < 2:
        raise ValueError(f"expected a field of shape (2, ny, nx), got {v_t.shape}")
    vx, vy = v_t[0], v_t[1]
    ny, nx = vx.shape
    mag = np.hypot(vx, vy)
    vmax = mag.max()
    sat = mag / vmax if vmax > 0 else np.zeros_like(mag)
    hsv = np.stack([_hue(vx, vy), sat, np.ones_like(sat)], axis=-1)
    inner = hsv_to_rgb(hsv)
    if border > 0:
        H, W = ny + 2 * border, nx + 2 * border
        yy, xx = np.mgrid[0:H, 0:W]
        ring = hsv_to_rgb(np.stack([_hue(xx - (W - 1) / 2, yy - (H - 1) / 2),
                                    np.ones((H, W)), np.ones((H, W))], axis=-1))
        ring[border:border + ny, border:border + nx] = inner
        inner = ring
    return np.round(inner * 255).astype(np.uint8)


def project_field(v, keep=(0, 1)):
    """Keep two components of a ``(d, ...)`` field, e.g. for a slice of a 3D field."""
    v = np.asarray(v, dtype=float)
    return v[list(keep)]


def translation_correct(v):
    """Subtract the per-frame mean motion vector from ``(T, 2, ny, nx)``."""
    v = np.asarray(v, dtype=float)
    return v - v.mean(axis=(-2, -1), keepdims=True)

"""Input validation helpers shared by the functional API and the estimators."""

import numpy as np


def check_finite(x, name="array"):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains NaN or infinite values")
    return x


def check_image_seq(p, name="p", shape=None):
    """Return ``p`` as a float array of shape (T, ny, nx).

    A single 2D frame is promoted to a one-frame sequence.
    """
    p = check_finite(p, name)
    if p.ndim == 2:
        p = p[None]
    if p.ndim != 3:
        raise ValueError(f"{name} must have shape (T, ny, nx), got {p.shape}")
    if shape is not None and p.shape != tuple(shape):
        raise ValueError(f"{name} has shape {p.shape}, expected {tuple(shape)}")
    return p


def check_motion_seq(v, image_shape, name="v"):
    """Return ``v`` as a float array of shape (T, 2, ny, nx) matching ``image_shape``."""
    T, ny, nx = image_shape
    if v is None:
        return np.zeros((T, 2, ny, nx))
    v = check_finite(v, name)
    if v.shape != (T, 2, ny, nx):
        raise ValueError(f"{name} has shape {v.shape}, expected {(T, 2, ny, nx)}")
    return v


def check_same_shape(a, b, names=("a", "b")):
    if np.shape(a) != np.shape(b):
        raise ValueError(
            f"shape mismatch: {names[0]} {np.shape(a)} vs {names[1]} {np.shape(b)}"
        )


def check_positive(value, name):
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value}")
    return value


def check_nonnegative(value, name):
    if not value >= 0:
        raise ValueError(f"{name} must be nonnegative, got {value}")
    return value

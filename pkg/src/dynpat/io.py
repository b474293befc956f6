"""Volume files (raw little-endian float64 plus JSON sidecar) and PNG snapshots."""

import json
import os

import numpy as np
from PIL import Image


def write_volume(path, array, units="", provenance=None):
    """Write ``path + '.bin'`` and ``path + '.json'``; returns both paths."""
    array = np.ascontiguousarray(array, dtype="<f8")
    bin_path, meta_path = path + ".bin", path + ".json"
    array.tofile(bin_path)
    meta = {"shape": list(array.shape), "dtype": "<f8", "order": "C", "units": units,
            "provenance": provenance or {}}
    with open(meta_path, "w") as fh:
        json.dump(meta, fh, indent=2)
    return bin_path, meta_path


def read_volume(path):
    """Inverse of :func:`write_volume`; returns ``(array, metadata)``."""
    with open(path + ".json") as fh:
        meta = json.load(fh)
    data = np.fromfile(path + ".bin", dtype=meta.get("dtype", "<f8"))
    return data.reshape(meta["shape"]), meta


def to_gray8(image, vmin=0.0, vmax=1.0):
    """Map ``image`` linearly from ``[vmin, vmax]`` to 0..255 with clipping."""
    scale = vmax - vmin if vmax > vmin else 1.0
    return np.round(np.clip((np.asarray(image, dtype=float) - vmin) / scale, 0, 1) * 255
                    ).astype(np.uint8)


def save_frames_png(frames, out_dir, prefix="frame", vmin=0.0, vmax=1.0):
    """One grayscale PNG per frame with a fixed window; returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for t, img in enumerate(frames):
        path = os.path.join(out_dir, f"{prefix}_{t:03d}.png")
        Image.fromarray(to_gray8(img, vmin, vmax)).save(path)
        paths.append(path)
    return paths


def save_rgb_png(rgb, path):
    Image.fromarray(np.asarray(rgb, dtype=np.uint8)).save(path)
    return path

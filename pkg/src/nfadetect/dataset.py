"""Dataset ingestion and preprocessing for image + binary-mask corpora.

Images are read as raw digital numbers with no rescaling: detection with
an empirically estimated background is affine-invariant, so intensity
normalization is semantically inert and skipping it keeps golden files
stable across bit depths.  Supported inputs are 8- and 16-bit
single-channel PNG or PGM; color images are rejected.

The manifest format is one record per line, tab separated:
image_id<TAB>image_path<TAB>mask_path<TAB>split, with an empty mask path
for unlabeled records.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, replace

import numpy as np
from PIL import Image, UnidentifiedImageError

from .detect import connected_components
from .evaluate import GroundTruthBox

__all__ = [
    "DatasetRecord",
    "load_image",
    "mask_to_boxes",
    "load_mask",
    "filter_by_extent",
    "cubic_kernel",
    "bicubic_resize",
    "rescale_box",
    "split_dataset",
    "read_manifest",
    "write_manifest",
    "save_image_png",
]

DEFAULT_MAX_EXTENT = 90
_ALLOWED_MODES = {"L", "I", "I;16"}


@dataclass(frozen=True)
class DatasetRecord:
    image_id: str
    image_path: str
    mask_path: str | None
    split: str


def load_image(path) -> np.ndarray:
    """Load an 8/16-bit single-channel PNG or PGM as float64 (H, W, 1).

    Values are kept as raw DN.  Color or palette images and unreadable
    files are rejected with a ValueError.
    """
    try:
        with Image.open(path) as img:
            img.load()
            mode = img.mode
            if mode not in _ALLOWED_MODES:
                raise ValueError(
                    f"{path}: unsupported image mode {mode!r}; expected "
                    "8/16-bit single-channel (got color or exotic depth)")
            arr = np.asarray(img, dtype=np.float64)
    except UnidentifiedImageError as exc:
        raise ValueError(f"{path}: not a readable image ({exc})") from exc
    except OSError as exc:
        raise ValueError(f"{path}: truncated or unreadable file ({exc})") from exc
    if arr.ndim != 2:
        raise ValueError(f"{path}: expected a single-channel image")
    return arr[:, :, np.newaxis]


def save_image_png(path, values: np.ndarray) -> None:
    """Write a 2-d array as 16-bit grayscale PNG (values rounded, clipped)."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    if arr.ndim != 2:
        raise ValueError("save_image_png expects a single-channel image")
    dn = np.clip(np.rint(arr), 0, 65535).astype(np.uint16)
    Image.fromarray(dn).save(path, format="PNG")


def mask_to_boxes(mask, image_id: str = "") -> list:
    """Tight boxes of the 8-connected nonzero components of a mask."""
    arr = np.asarray(mask)
    if arr.ndim == 3:
        arr = arr[:, :, 0]
    components = connected_components(arr != 0, connectivity=8)
    out = []
    for pixels in components:
        rows, cols = pixels[:, 0], pixels[:, 1]
        out.append(GroundTruthBox(
            image_id=image_id,
            box=(int(cols.min()), int(rows.min()), int(cols.max()), int(rows.max())),
            extent=int(len(pixels)),
        ))
    return out


def load_mask(path) -> np.ndarray:
    """Load a binary mask image as a boolean (H, W) array (nonzero = true)."""
    return load_image(path)[:, :, 0] != 0


def filter_by_extent(records, max_extent: int = DEFAULT_MAX_EXTENT):
    """Drop records whose mask holds any component larger than max_extent.

    Returns (kept_records, dropped_fraction).  Records must have masks.
    """
    kept = []
    dropped = 0
    records = list(records)
    for rec in records:
        if not rec.mask_path:
            raise ValueError(f"record {rec.image_id} has no mask")
        boxes = mask_to_boxes(load_mask(rec.mask_path), rec.image_id)
        if any(gt.extent > max_extent for gt in boxes):
            dropped += 1
        else:
            kept.append(rec)
    fraction = dropped / len(records) if records else 0.0
    return kept, fraction


def cubic_kernel(t, a: float = -0.5):
    """Keys cubic convolution kernel with parameter a (default -0.5)."""
    t = np.abs(np.asarray(t, dtype=np.float64))
    out = np.zeros_like(t)
    near = t <= 1.0
    out[near] = (a + 2.0) * t[near] ** 3 - (a + 3.0) * t[near] ** 2 + 1.0
    far = (t > 1.0) & (t < 2.0)
    out[far] = a * (t[far] ** 3 - 5.0 * t[far] ** 2 + 8.0 * t[far] - 4.0)
    if np.ndim(t) == 0:
        return float(out)
    return out


def _resize_matrix(n_in: int, n_out: int) -> np.ndarray:
    """Dense (n_out, n_in) matrix of Keys weights with clamped edges."""
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    base = np.floor(src).astype(int)
    frac = src - base
    mat = np.zeros((n_out, n_in))
    for tap in range(-1, 3):
        weight = cubic_kernel(frac - tap)
        idx = np.clip(base + tap, 0, n_in - 1)
        np.add.at(mat, (np.arange(n_out), idx), weight)
    return mat


def bicubic_resize(image, out_h: int, out_w: int) -> np.ndarray:
    """Separable Keys (a = -0.5) cubic resampling with clamped edges.

    Output pixel centers are aligned to input centers by the usual
    half-pixel convention, so equal dimensions reproduce the input
    exactly and constant images stay constant (the kernel weights sum
    to one at every phase).
    """
    if out_h < 1 or out_w < 1:
        raise ValueError("output dimensions must be >= 1")
    arr = np.asarray(image, dtype=np.float64)
    squeeze = arr.ndim == 2
    if squeeze:
        arr = arr[:, :, np.newaxis]
    h, w, k = arr.shape
    rows = _resize_matrix(h, out_h)
    cols = _resize_matrix(w, out_w)
    out = np.einsum("oi,iwk->owk", rows, arr)
    out = np.einsum("pj,ojk->opk", cols, out)
    return out[:, :, 0] if squeeze else out


def rescale_box(box, sy: float, sx: float):
    """Rescale an inclusive box by (sy, sx), rounding outward.

    The continuous extent [x_min, x_max + 1) is scaled, then mins are
    floored and maxes ceiled so a target never shrinks below matchable
    size.
    """
    x0, y0, x1, y1 = box
    nx0 = math.floor(x0 * sx)
    ny0 = math.floor(y0 * sy)
    nx1 = math.ceil((x1 + 1) * sx) - 1
    ny1 = math.ceil((y1 + 1) * sy) - 1
    return (nx0, ny0, max(nx1, nx0), max(ny1, ny0))


def split_dataset(records, ratios=(0.6, 0.2, 0.2), seed: int = 0):
    """Assign train/val/test splits by seeded shuffle then partition.

    Sizes are floor(n * train), floor(n * val), remainder test.  Returns
    new records in the original order with their split fields set.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError("ratios must sum to 1")
    records = list(records)
    n = len(records)
    order = np.random.default_rng(seed).permutation(n)
    n_train = int(n * ratios[0])
    n_val = int(n * ratios[1])
    labels = [""] * n
    for pos, idx in enumerate(order):
        if pos < n_train:
            labels[idx] = "train"
        elif pos < n_train + n_val:
            labels[idx] = "val"
        else:
            labels[idx] = "test"
    return [replace(rec, split=label) for rec, label in zip(records, labels)]


def read_manifest(path, check_files: bool = True):
    """Read a tab-separated manifest into DatasetRecords.

    Enforces unique ids; with check_files, referenced paths must exist.
    Relative paths are resolved against the manifest's directory.
    """
    base = os.path.dirname(os.path.abspath(path))
    records = []
    seen = set()
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ValueError(f"{path}:{line_no}: expected 4 tab-separated fields")
            image_id, image_path, mask_path, split = parts
            if image_id in seen:
                raise ValueError(f"{path}:{line_no}: duplicate id {image_id!r}")
            seen.add(image_id)
            image_path = os.path.join(base, image_path) \
                if not os.path.isabs(image_path) else image_path
            if mask_path:
                mask_path = os.path.join(base, mask_path) \
                    if not os.path.isabs(mask_path) else mask_path
            if check_files:
                if not os.path.exists(image_path):
                    raise ValueError(f"{path}:{line_no}: missing image {image_path}")
                if mask_path and not os.path.exists(mask_path):
                    raise ValueError(f"{path}:{line_no}: missing mask {mask_path}")
            records.append(DatasetRecord(image_id=image_id, image_path=image_path,
                                         mask_path=mask_path or None, split=split))
    return records


def write_manifest(path, records) -> None:
    """Write records as the tab-separated manifest (paths kept verbatim)."""
    with open(path, "w") as fh:
        for rec in records:
            fh.write(f"{rec.image_id}\t{rec.image_path}\t"
                     f"{rec.mask_path or ''}\t{rec.split}\n")

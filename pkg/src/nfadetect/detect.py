"""Grouping meaningful pixels into discrete detections.

Thresholding the NFA map at eps keeps the expected number of false
alarms per image below eps; the surviving pixels are grouped by
connectivity and each group becomes one detection with a tight bounding
box.  The aggregate NFA of a detection is the minimum over its pixels:
the peak pixel carries the evidence, consistent with scoring a box by
its center while staying robust to off-center peaks.  No non-maximum
suppression is needed since components have disjoint support.

Boxes are (x_min, y_min, x_max, y_max) in zero-based inclusive pixel
coordinates, x along columns and y along rows.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .background import BackgroundModel, as_image_tensor, estimate_background
from .nfa import NfaMap, SignificanceMap, fuse_scales, nfa_gaussian_map, sigm_alpha

__all__ = [
    "Detection",
    "DetectConfig",
    "threshold_mask",
    "connected_components",
    "components_to_detections",
    "detect",
    "write_detections_csv",
    "read_detections_csv",
    "DETECTIONS_CSV_HEADER",
]

DETECTIONS_CSV_HEADER = ("image_id", "x_min", "y_min", "x_max", "y_max",
                         "log10_nfa", "score", "pixel_count")


@dataclass(frozen=True)
class Detection:
    """One detected object: box, aggregate NFA (log10), score in [0, 1]."""

    box: tuple[int, int, int, int]
    log10_nfa: float
    score: float
    pixel_count: int
    peak: tuple[int, int]


@dataclass(frozen=True)
class DetectConfig:
    """Parameters of the detection pipeline.

    scales lists decimation factors (powers of two, 1 = native); the
    matching scale_weights default to all ones, the equal-weight rule of
    a constant number of tests per scale.  A precomputed model replaces
    estimation at the native scale only; coarser levels are re-estimated
    from the decimated image.
    """

    epsilon: float = 1.0
    method: str = "empirical"
    ridge: float = 1e-6
    connectivity: int = 8
    alpha: float = 1.0
    tau: float = 0.0
    scales: tuple[int, ...] = (1,)
    scale_weights: tuple[float, ...] | None = None
    one_sided: bool = False
    model: BackgroundModel | None = None

    def validate(self) -> None:
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be > 0")
        if self.connectivity not in (4, 8):
            raise ValueError("connectivity must be 4 or 8")
        if self.alpha <= 0.0:
            raise ValueError("alpha must be > 0")
        if self.ridge < 0.0:
            raise ValueError("ridge must be >= 0")
        if not self.scales:
            raise ValueError("scales must be non-empty")
        for s in self.scales:
            if s < 1 or (s & (s - 1)) != 0:
                raise ValueError(f"scale factors must be powers of two >= 1, got {s}")
        if self.scale_weights is not None and len(self.scale_weights) != len(self.scales):
            raise ValueError("scale_weights length must match scales")


def threshold_mask(nfa: NfaMap, epsilon: float) -> np.ndarray:
    """Boolean mask of eps-meaningful pixels: NFA <= epsilon."""
    if epsilon <= 0.0:
        raise ValueError("epsilon must be > 0")
    return nfa.log10_values <= math.log10(epsilon)


_NEIGHBORS_4 = ((-1, 0), (1, 0), (0, -1), (0, 1))
_NEIGHBORS_8 = _NEIGHBORS_4 + ((-1, -1), (-1, 1), (1, -1), (1, 1))


def connected_components(mask: np.ndarray, connectivity: int = 8):
    """Partition true pixels into maximal connected sets.

    Returns a list of (N_i, 2) int arrays of (row, col) pairs, each in
    scan order; components are ordered by (min row, min col).
    """
    if connectivity not in (4, 8):
        raise ValueError("connectivity must be 4 or 8")
    mask = np.asarray(mask, dtype=bool)
    offsets = _NEIGHBORS_4 if connectivity == 4 else _NEIGHBORS_8
    h, w = mask.shape
    seen = np.zeros_like(mask)
    components = []
    for r0, c0 in np.argwhere(mask):
        if seen[r0, c0]:
            continue
        stack = [(int(r0), int(c0))]
        seen[r0, c0] = True
        pixels = []
        while stack:
            r, c = stack.pop()
            pixels.append((r, c))
            for dr, dc in offsets:
                rr, cc = r + dr, c + dc
                if 0 <= rr < h and 0 <= cc < w and mask[rr, cc] and not seen[rr, cc]:
                    seen[rr, cc] = True
                    stack.append((rr, cc))
        pixels.sort()
        components.append(np.array(pixels, dtype=np.int64))
    components.sort(key=lambda px: (int(px[:, 0].min()), int(px[:, 1].min())))
    return components


def components_to_detections(components, nfa: NfaMap, alpha: float = 1.0,
                             tau: float = 0.0):
    """Turn pixel components into detections sorted by ascending NFA."""
    dets = []
    for pixels in components:
        rows, cols = pixels[:, 0], pixels[:, 1]
        vals = nfa.log10_values[rows, cols]
        best = int(np.argmin(vals))
        log10_nfa = float(vals[best])
        box = (int(cols.min()), int(rows.min()), int(cols.max()), int(rows.max()))
        dets.append(Detection(
            box=box,
            log10_nfa=log10_nfa,
            score=sigm_alpha(-log10_nfa, alpha=alpha, tau=tau),
            pixel_count=int(len(pixels)),
            peak=(int(rows[best]), int(cols[best])),
        ))
    dets.sort(key=lambda d: (d.log10_nfa, d.box[1], d.box[0]))
    return dets


def _decimate2(img: np.ndarray) -> np.ndarray:
    """One pyramid level: 2x2 block averaging; odd trailing row/col dropped."""
    h, w, k = img.shape
    h2, w2 = h // 2, w // 2
    if h2 < 1 or w2 < 1:
        raise ValueError("image too small to decimate")
    trimmed = img[:h2 * 2, :w2 * 2]
    return trimmed.reshape(h2, 2, w2, 2, k).mean(axis=(1, 3))


def _pyramid(img: np.ndarray, scales) -> dict[int, np.ndarray]:
    levels = {1: img}
    current, factor = img, 1
    for _ in range(int(max(scales)).bit_length() - 1):
        current = _decimate2(current)
        factor *= 2
        levels[factor] = current
    return {s: levels[s] for s in scales}


def detect(image, config: DetectConfig = DetectConfig()):
    """Full pipeline: model, NFA map(s), fusion, threshold, grouping.

    Deterministic: identical image and config give identical output.
    """
    config.validate()
    img = as_image_tensor(image)
    h, w, _ = img.shape
    eta = h * w
    weights = config.scale_weights or tuple(1.0 for _ in config.scales)

    sig_maps = []
    levels = _pyramid(img, config.scales)
    for factor in config.scales:
        level_img = levels[factor]
        if factor == 1 and config.model is not None:
            model = config.model
        else:
            model = estimate_background(level_img, method=config.method,
                                        ridge=config.ridge)
        nfa = nfa_gaussian_map(level_img, model, eta_test=eta,
                               one_sided=config.one_sided)
        sig_maps.append(SignificanceMap(values=-nfa.log10_values))

    fused = fuse_scales(sig_maps, weights, (h, w))
    fused_nfa = NfaMap(log10_values=-fused.values, eta_test=eta)

    mask = threshold_mask(fused_nfa, config.epsilon)
    components = connected_components(mask, config.connectivity)
    return components_to_detections(components, fused_nfa,
                                    alpha=config.alpha, tau=config.tau)


def write_detections_csv(path, rows) -> None:
    """Write (image_id, Detection) pairs in the documented CSV format."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(DETECTIONS_CSV_HEADER)
        for image_id, det in rows:
            x0, y0, x1, y1 = det.box
            writer.writerow([image_id, x0, y0, x1, y1,
                             repr(det.log10_nfa), repr(det.score),
                             det.pixel_count])


def read_detections_csv(path):
    """Read the detections CSV; returns a list of (image_id, Detection)."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != DETECTIONS_CSV_HEADER:
            raise ValueError(f"{path}: bad or missing detections CSV header")
        for line, row in enumerate(reader, start=2):
            if len(row) != len(DETECTIONS_CSV_HEADER):
                raise ValueError(f"{path}:{line}: expected "
                                 f"{len(DETECTIONS_CSV_HEADER)} fields")
            image_id, x0, y0, x1, y1, log10_nfa, score, count = row
            det = Detection(
                box=(int(x0), int(y0), int(x1), int(y1)),
                log10_nfa=float(log10_nfa),
                score=float(score),
                pixel_count=int(count),
                peak=(int(y0), int(x0)),
            )
            out.append((image_id, det))
    return out

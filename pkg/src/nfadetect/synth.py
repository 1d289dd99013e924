"""Synthetic scenes under the naive model, with optional injected targets.

Noise images are i.i.d. per-pixel K-variate Gaussian draws from a seeded
numpy PCG64 generator, so regeneration from (seed, params) is
bit-identical.  Per-image seeds for datasets are derived from the master
seed by a splitmix64 stream (documented below), which keeps image i
independent of how many images are generated or in which order.

Targets are additive bumps in background-sigma units, so detectability
is analytically predictable regardless of the background scale: a point
target of amplitude a raises its pixel's Mahalanobis distance by exactly
a under the true model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .evaluate import GroundTruthBox

__all__ = [
    "SynthScene",
    "gen_noise_image",
    "inject_target",
    "gen_dataset",
    "splitmix64",
]

MAX_TARGET_EXTENT = 80  # small-target bound; caps gaussian_blob radius at 4


@dataclass(frozen=True)
class SynthScene:
    image: np.ndarray
    gts: tuple
    seed: int
    params: dict


def splitmix64(seed: int):
    """Infinite stream of 64-bit values from the splitmix64 recurrence.

    state += 0x9E3779B97F4A7C15; z = state; z = (z ^ (z >> 30)) *
    0xBF58476D1CE4E5B9; z = (z ^ (z >> 27)) * 0x94D049BB133111EB;
    yield z ^ (z >> 31).
    """
    mask = (1 << 64) - 1
    state = seed & mask
    while True:
        state = (state + 0x9E3779B97F4A7C15) & mask
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
        yield z ^ (z >> 31)


def _cov_factor(cov: np.ndarray) -> np.ndarray:
    """A factor F with cov = F F^T; accepts PSD (including singular) input."""
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(cov)
        if np.min(vals) < -1e-10 * max(1.0, float(np.max(np.abs(vals)))):
            raise ValueError("covariance must be positive semidefinite")
        return vecs * np.sqrt(np.clip(vals, 0.0, None))


def gen_noise_image(h: int, w: int, k: int, mean, cov, seed: int) -> np.ndarray:
    """i.i.d. K-variate Gaussian noise image of shape (H, W, K).

    Draws standard normals from numpy's seeded PCG64 generator and maps
    them through a factor of cov.  A zero covariance yields a constant
    image equal to the mean.
    """
    if h < 1 or w < 1 or k < 1:
        raise ValueError("dimensions must be >= 1")
    mean = np.broadcast_to(np.atleast_1d(np.asarray(mean, dtype=np.float64)), (k,))
    cov = np.asarray(cov, dtype=np.float64)
    if cov.ndim == 0:
        cov = np.eye(k) * float(cov)
    if cov.shape != (k, k):
        raise ValueError(f"covariance must be ({k}, {k}), got {cov.shape}")
    if not np.allclose(cov, cov.T):
        raise ValueError("covariance must be symmetric")
    factor = _cov_factor(cov)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((h, w, k))
    return mean + z @ factor.T


def _blob_profile(amplitude: float, radius: int):
    """Offsets and additive values of a disk-truncated Gaussian bump."""
    rr, cc = np.mgrid[-radius:radius + 1, -radius:radius + 1]
    dist_sq = rr ** 2 + cc ** 2
    inside = dist_sq <= radius ** 2
    sigma_blob = radius / 2.0
    values = amplitude * np.exp(-dist_sq / (2.0 * sigma_blob ** 2))
    return rr[inside], cc[inside], values[inside]


def inject_target(image, center, amplitude: float, radius: int = 0,
                  profile: str = "point", sigma=1.0, image_id: str = ""):
    """Add a target of the given amplitude (in sigma units) to a copy.

    profile "point" raises one pixel by amplitude * sigma; "gaussian_blob"
    adds amplitude * sigma * exp(-r^2 / (2 (radius/2)^2)) truncated at
    radius.  The ground-truth box is the truncation support clipped to
    the image; a zero-amplitude target still emits its box (useful for
    miss-rate fixtures).
    """
    img = np.array(image, dtype=np.float64, copy=True)
    if img.ndim == 2:
        img = img[:, :, np.newaxis]
    h, w, k = img.shape
    row, col = int(center[0]), int(center[1])
    if not (0 <= row < h and 0 <= col < w):
        raise ValueError(f"center {center} out of bounds for {h}x{w} image")
    sigma_vec = np.broadcast_to(np.atleast_1d(np.asarray(sigma, dtype=np.float64)),
                                (k,))
    if profile == "point":
        img[row, col] += amplitude * sigma_vec
        support = [(row, col)]
    elif profile == "gaussian_blob":
        if radius < 1:
            raise ValueError("gaussian_blob requires radius >= 1")
        if radius > 4:
            raise ValueError(
                f"radius {radius} exceeds the small-target bound "
                f"({MAX_TARGET_EXTENT} pixels, radius <= 4)")
        drr, dcc, vals = _blob_profile(amplitude, radius)
        support = []
        for dr, dc, v in zip(drr, dcc, vals):
            rr, cc = row + int(dr), col + int(dc)
            if 0 <= rr < h and 0 <= cc < w:
                img[rr, cc] += v * sigma_vec
                support.append((rr, cc))
    else:
        raise ValueError(f"unknown profile {profile!r}")
    rows = [p[0] for p in support]
    cols = [p[1] for p in support]
    gt = GroundTruthBox(image_id=image_id,
                        box=(min(cols), min(rows), max(cols), max(rows)),
                        extent=len(support))
    out = img if np.ndim(image) == 3 else img[:, :, 0]
    return out, gt


def gen_dataset(n_images: int, h: int = 256, w: int = 256, mean: float = 1000.0,
                sigma: float = 100.0, targets_per_image: int = 1,
                amplitude: float = 5.0, radius: int = 0, profile: str = "point",
                seed: int = 0, k: int = 1):
    """Deterministic list of synthetic scenes with injected targets.

    Image i uses the i-th output of the splitmix64 stream of the master
    seed (reduced mod 2^63) both for its noise and for target placement;
    target centers are uniform with a margin of `radius` so the support
    never clips.  Regeneration from (seed, params) is bit-identical.
    """
    if n_images < 0:
        raise ValueError("n_images must be >= 0")
    params = {
        "h": h, "w": w, "k": k, "mean": mean, "sigma": sigma,
        "targets_per_image": targets_per_image, "amplitude": amplitude,
        "radius": radius, "profile": profile, "seed": seed,
    }
    stream = splitmix64(seed)
    scenes = []
    cov = np.eye(k) * sigma ** 2
    margin = radius
    for i in range(n_images):
        image_seed = next(stream) % (1 << 63)
        image_id = f"img_{i:05d}"
        img = gen_noise_image(h, w, k, mean, cov, image_seed)
        rng = np.random.default_rng(image_seed + 1)
        gts = []
        for _ in range(targets_per_image):
            row = int(rng.integers(margin, h - margin))
            col = int(rng.integers(margin, w - margin))
            img, gt = inject_target(img, (row, col), amplitude, radius=radius,
                                    profile=profile, sigma=sigma,
                                    image_id=image_id)
            gts.append(gt)
        scenes.append(SynthScene(image=img, gts=tuple(gts), seed=image_seed,
                                 params=dict(params)))
    return scenes

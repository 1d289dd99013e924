"""Background statistics: naive-model estimation and Mahalanobis whitening.

Images are float64 arrays of shape (H, W, K), channel-last; a plain
(H, W) array is accepted anywhere and treated as K = 1.  The background
model holds the per-channel mean, the regularized covariance and its
Cholesky factor, so whitening a pixel is a single triangular solve.

Covariance uses the population convention (divisor N): the tested pixels
are the same population the model is estimated from, which keeps the
mean of the squared Mahalanobis norm over the estimating image exactly
equal to the channel count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "BackgroundModel",
    "DegenerateModelError",
    "as_image_tensor",
    "estimate_background",
    "mahalanobis_sq",
    "mahalanobis_sq_map",
]

# MAD times this factor is a consistent sigma estimate for Gaussian data
_MAD_SCALE = 1.4826
DEFAULT_RIDGE = 1e-6


class DegenerateModelError(ValueError):
    """Raised when a degenerate background model reaches a whitening path."""


def as_image_tensor(image) -> np.ndarray:
    """Coerce input to a float64 (H, W, K) array; (H, W) means K = 1."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, np.newaxis]
    if arr.ndim != 3:
        raise ValueError(f"image must have shape (H, W) or (H, W, K), got {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1 or arr.shape[2] < 1:
        raise ValueError(f"empty image dimensions {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("image contains non-finite values")
    return arr


@dataclass(frozen=True)
class BackgroundModel:
    """Naive-model parameters of an image background.

    `covariance` is the regularized matrix actually used for whitening
    (raw estimate plus ridge * trace/K on the diagonal) and `whitener`
    its lower Cholesky factor, or None when the model is degenerate.
    `eta_test` records the pixel count of the estimating image.
    """

    mean: np.ndarray
    covariance: np.ndarray
    whitener: np.ndarray | None
    eta_test: int
    method: str
    ridge: float
    degenerate: bool

    @property
    def channels(self) -> int:
        return self.mean.shape[0]

    def to_dict(self) -> dict:
        """JSON-ready form for run reports; the whitener is recomputed on load."""
        return {
            "mean": self.mean.tolist(),
            "covariance": self.covariance.tolist(),
            "eta_test": self.eta_test,
            "method": self.method,
            "ridge": self.ridge,
            "degenerate": self.degenerate,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "BackgroundModel":
        model = make_model(payload["mean"], payload["covariance"],
                           eta_test=payload["eta_test"],
                           method=payload.get("method", "given"))
        return BackgroundModel(mean=model.mean, covariance=model.covariance,
                               whitener=model.whitener, eta_test=model.eta_test,
                               method=model.method,
                               ridge=float(payload.get("ridge", 0.0)),
                               degenerate=model.degenerate)


def make_model(mean, covariance, eta_test: int, method: str = "given",
               ridge: float = 0.0) -> BackgroundModel:
    """Build a model from known parameters (no estimation, no ridge added)."""
    mean = np.atleast_1d(np.asarray(mean, dtype=np.float64))
    cov = np.asarray(covariance, dtype=np.float64)
    if cov.ndim == 0:
        cov = cov.reshape(1, 1)
    k = mean.shape[0]
    if cov.shape != (k, k):
        raise ValueError(f"covariance shape {cov.shape} does not match mean length {k}")
    if eta_test < 1:
        raise ValueError("eta_test must be >= 1")
    lam = ridge * float(np.trace(cov)) / k
    cov_reg = cov + lam * np.eye(k)
    whitener, degenerate = _try_cholesky(cov_reg)
    return BackgroundModel(mean=mean, covariance=cov_reg, whitener=whitener,
                           eta_test=int(eta_test), method=method, ridge=float(ridge),
                           degenerate=degenerate)


def _try_cholesky(cov: np.ndarray):
    if float(np.trace(cov)) <= 0.0:
        return None, True
    try:
        return np.linalg.cholesky(cov), False
    except np.linalg.LinAlgError:
        return None, True


def estimate_background(image, method: str = "empirical",
                        ridge: float = DEFAULT_RIDGE) -> BackgroundModel:
    """Estimate the naive-model parameters from all pixels of an image.

    method "empirical": per-channel sample mean and population covariance
    (divisor N).  method "robust": per-channel median and a diagonal
    covariance of squared scaled MADs; MAD does not define a natural full
    covariance, so the robust mode is diagonal-only.

    The covariance is regularized to cov + lam*I with lam = ridge *
    trace(cov) / K before factorization.  A constant image yields a model
    flagged degenerate; whitening such a model raises instead of dividing
    by zero.
    """
    img = as_image_tensor(image)
    h, w, k = img.shape
    n = h * w
    if n < k + 1:
        raise ValueError(f"need at least K+1={k + 1} pixels, image has {n}")
    if ridge < 0.0:
        raise ValueError("ridge must be >= 0")
    flat = img.reshape(n, k)
    if method == "empirical":
        mean = flat.mean(axis=0)
        centered = flat - mean
        cov = centered.T @ centered / n
    elif method == "robust":
        mean = np.median(flat, axis=0)
        mad = np.median(np.abs(flat - mean), axis=0)
        cov = np.diag((_MAD_SCALE * mad) ** 2)
    else:
        raise ValueError(f"unknown method {method!r}, expected 'empirical' or 'robust'")
    lam = ridge * float(np.trace(cov)) / k
    cov_reg = cov + lam * np.eye(k)
    whitener, degenerate = _try_cholesky(cov_reg)
    return BackgroundModel(mean=mean, covariance=cov_reg, whitener=whitener,
                           eta_test=n, method=method, ridge=float(ridge),
                           degenerate=degenerate)


def _require_whitener(model: BackgroundModel) -> np.ndarray:
    if model.degenerate or model.whitener is None:
        raise DegenerateModelError(
            "background model is degenerate (constant or rank-deficient image); "
            "Mahalanobis whitening is undefined")
    return model.whitener


def _forward_substitute(lower: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve L z = rhs for lower-triangular L; rhs has shape (K, N)."""
    k = lower.shape[0]
    z = np.empty_like(rhs)
    for i in range(k):
        acc = rhs[i]
        for j in range(i):
            acc = acc - lower[i, j] * z[j]
        z[i] = acc / lower[i, i]
    return z


def mahalanobis_sq(model: BackgroundModel, pixel) -> float:
    """Squared Mahalanobis norm of one K-vector under the model."""
    lower = _require_whitener(model)
    vec = np.atleast_1d(np.asarray(pixel, dtype=np.float64))
    if vec.shape != model.mean.shape:
        raise ValueError(f"pixel shape {vec.shape} does not match model K={model.channels}")
    z = _forward_substitute(lower, (vec - model.mean)[:, np.newaxis])
    return float(np.sum(z * z))


def mahalanobis_sq_map(model: BackgroundModel, image) -> np.ndarray:
    """Per-pixel squared Mahalanobis norm, returned as an (H, W) array."""
    lower = _require_whitener(model)
    img = as_image_tensor(image)
    h, w, k = img.shape
    if k != model.channels:
        raise ValueError(f"image has {k} channels, model expects {model.channels}")
    diff = (img.reshape(h * w, k) - model.mean).T
    z = _forward_substitute(lower, diff)
    return np.einsum("kn,kn->n", z, z).reshape(h, w)

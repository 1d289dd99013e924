"""Per-pixel false-alarm maps, significance, scores and scale fusion.

NFA values are stored as log10(NFA) throughout: the interesting tails
are far below the double underflow threshold and the log is what the
significance transform needs anyway.  A pixel with NFA <= eps is an
eps-meaningful detection; with eps = 1 the expected number of false
alarms per image under the naive model is at most one, independent of
image size.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .background import (
    BackgroundModel,
    _require_whitener,
    as_image_tensor,
    mahalanobis_sq_map,
)
from .special import ln_gamma, log_reg_upper_gamma_q

__all__ = [
    "NfaMap",
    "SignificanceMap",
    "nfa_gaussian_map",
    "significance_map",
    "sigm_alpha",
    "nfa_binomial",
    "fuse_scales",
    "save_raster",
    "load_raster",
]

_LN10 = math.log(10.0)
_RASTER_MAGIC = b"NFA1"


@dataclass(frozen=True)
class NfaMap:
    """Per-pixel number of false alarms, stored as log10(NFA).

    Entries never exceed log10(eta_test); -inf marks tails that are
    exactly zero at double precision.
    """

    log10_values: np.ndarray
    eta_test: int

    @property
    def shape(self):
        return self.log10_values.shape


@dataclass(frozen=True)
class SignificanceMap:
    """Per-pixel significance S = -log10(NFA); larger is more surprising."""

    values: np.ndarray

    @property
    def shape(self):
        return self.values.shape


def nfa_gaussian_map(image, model: BackgroundModel, eta_test: int | None = None,
                     one_sided: bool = False) -> NfaMap:
    """Gaussian-tail NFA per pixel: eta_test * Q(K/2, m^2 / 2).

    m^2 is the squared Mahalanobis norm under `model`.  eta_test defaults
    to the pixel count of the tested image; pass it explicitly to hold
    the number of tests constant across a scale pyramid.

    one_sided (K = 1 only) tests bright excursions using the upper
    Gaussian tail P(Z >= z) of the signed standardized value instead of
    the two-sided Mahalanobis tail.
    """
    img = as_image_tensor(image)
    h, w, k = img.shape
    if eta_test is None:
        eta_test = h * w
    if eta_test < 1:
        raise ValueError("eta_test must be >= 1")
    log10_eta = math.log10(float(eta_test))
    if one_sided:
        if k != 1:
            raise ValueError("one-sided mode is defined for K=1 only")
        log_tail = _one_sided_log_tail(img, model)
    else:
        msq = mahalanobis_sq_map(model, img)
        log_tail = log_reg_upper_gamma_q(k / 2.0, msq / 2.0)
    with np.errstate(invalid="ignore"):
        values = log10_eta + log_tail / _LN10
    return NfaMap(log10_values=values, eta_test=int(eta_test))


def _one_sided_log_tail(img: np.ndarray, model: BackgroundModel) -> np.ndarray:
    """ln P(Z >= z) for the signed standardized pixel values, K = 1."""
    sigma = float(_require_whitener(model)[0, 0])
    z = (img[:, :, 0] - model.mean[0]) / sigma
    out = np.empty_like(z)
    pos = z >= 0.0
    # P(Z >= z) = Q(1/2, z^2/2) / 2 for z >= 0, 1 - that below
    out[pos] = log_reg_upper_gamma_q(0.5, z[pos] ** 2 / 2.0) - math.log(2.0)
    neg = ~pos
    if np.any(neg):
        tail = 0.5 * np.exp(log_reg_upper_gamma_q(0.5, z[neg] ** 2 / 2.0))
        out[neg] = np.log1p(-tail)
    return out


def significance_map(nfa: NfaMap) -> SignificanceMap:
    """Entrywise sign flip: S = -log10(NFA)."""
    return SignificanceMap(values=-nfa.log10_values)


def sigm_alpha(s, alpha: float = 1.0, tau: float = 0.0):
    """Squash significance into a (0, 1) objectness score.

    logistic(alpha * (s - tau)): strictly increasing in s, midpoint 0.5
    at s = tau.  The slope alpha and threshold tau only reparametrize the
    score; rankings (and therefore AP) are unchanged.
    """
    if alpha <= 0.0:
        raise ValueError("alpha must be > 0")
    z = alpha * (np.atleast_1d(np.asarray(s, dtype=np.float64)) - tau)
    out = np.empty_like(z)
    pos = z >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    if np.isscalar(s) or np.ndim(s) == 0:
        return float(out[0])
    return out.reshape(np.shape(s))


def nfa_binomial(k: int, n: int, p: float, n_tests: int) -> float:
    """Binomial NFA: n_tests * P(Bin(n, p) >= k), exact tail.

    The naive model for binary maps: n uniform i.i.d. "true" pixels with
    per-pixel probability p, k of them falling inside the tested shape.
    Tail computed by log-space summation of the pmf terms.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if k < 0:
        raise ValueError("k must be >= 0")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must be in [0, 1]")
    if n_tests < 1:
        raise ValueError("n_tests must be >= 1")
    if k == 0:
        return float(n_tests)
    if k > n:
        return 0.0
    if p == 0.0:
        return 0.0
    if p == 1.0:
        return float(n_tests)
    log_terms = _binomial_log_pmf_terms(k, n, p)
    peak = log_terms.max()
    tail = math.exp(peak) * float(np.sum(np.exp(log_terms - peak)))
    return n_tests * tail


def _binomial_log_pmf_terms(k: int, n: int, p: float) -> np.ndarray:
    # ln C(n, j) by the ratio recurrence from ln C(n, k)
    j = np.arange(k, n + 1, dtype=np.float64)
    ln_comb = np.empty_like(j)
    ln_comb[0] = (ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0))
    if len(j) > 1:
        steps = np.log(n - j[:-1]) - np.log(j[:-1] + 1.0)
        ln_comb[1:] = ln_comb[0] + np.cumsum(steps)
    return ln_comb + j * math.log(p) + (n - j) * math.log1p(-p)


def fuse_scales(maps, weights, target_shape) -> SignificanceMap:
    """Fuse per-scale significance maps by weighted per-pixel maximum.

    Each map is brought to the target grid by nearest neighbor, then the
    fused value at a pixel is max_l weights[l] * S_l.  With all weights 1
    this is a plain maximum, the equal-weight default of a constant
    number of tests per scale; significance composes under max (a pixel
    is meaningful if meaningful at any scale), which a weighted sum would
    not preserve.
    """
    maps = list(maps)
    if not maps:
        raise ValueError("fuse_scales requires at least one map")
    weights = [float(v) for v in weights]
    if len(weights) != len(maps):
        raise ValueError("one weight per scale is required")
    if any(not math.isfinite(v) or v <= 0.0 for v in weights):
        raise ValueError("weights must be finite and > 0")
    th, tw = int(target_shape[0]), int(target_shape[1])
    fused = None
    for smap, wgt in zip(maps, weights):
        up = wgt * _nearest_resize(smap.values, th, tw)
        fused = up if fused is None else np.maximum(fused, up)
    return SignificanceMap(values=fused)


def _nearest_resize(values: np.ndarray, th: int, tw: int) -> np.ndarray:
    h, w = values.shape
    rows = (np.arange(th) * h) // th
    cols = (np.arange(tw) * w) // tw
    return values[np.ix_(rows, cols)]


def save_raster(path, values: np.ndarray) -> None:
    """Write an (H, W) map as float32 binary: 8-byte header then data.

    Header is magic b"NFA1", uint16 height, uint16 width (little endian);
    data is row-major float32.  Dimensions above 65535 are not supported.
    """
    arr = np.asarray(values, dtype=np.float32)
    if arr.ndim != 2:
        raise ValueError("raster must be 2-d")
    h, w = arr.shape
    if h > 0xFFFF or w > 0xFFFF:
        raise ValueError("raster dimensions exceed the uint16 header limit")
    with open(path, "wb") as fh:
        fh.write(_RASTER_MAGIC)
        fh.write(struct.pack("<HH", h, w))
        fh.write(arr.tobytes(order="C"))


def load_raster(path) -> np.ndarray:
    """Read a raster written by :func:`save_raster`; returns float32 (H, W)."""
    with open(path, "rb") as fh:
        head = fh.read(8)
        if len(head) != 8 or head[:4] != _RASTER_MAGIC:
            raise ValueError(f"{path}: not a raster dump (bad magic)")
        h, w = struct.unpack("<HH", head[4:])
        data = fh.read()
    expected = h * w * 4
    if len(data) != expected:
        raise ValueError(f"{path}: truncated raster ({len(data)} of {expected} bytes)")
    return np.frombuffer(data, dtype="<f4").reshape(h, w).copy()

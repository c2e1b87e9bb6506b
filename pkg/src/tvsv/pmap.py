"""Local shape-parameter estimation for the space-variant TV_p prior.

Each pixel gets an exponent ``p_i`` estimated from the gradient magnitudes in
an ``s x s`` window by inverting the generalized Gaussian moment ratio
``h(p) = Gamma(1/p) Gamma(3/p) / Gamma(2/p)**2``.
"""

import numpy as np
from scipy.special import gammaln
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .operators import as_image, gradient

__all__ = [
    "P_MIN",
    "PMapEstimator",
    "RatioLookup",
    "estimate_pmap",
    "ggd_ratio",
    "global_shape",
    "gradient_magnitudes",
    "local_shape",
    "periodic_box_sum",
    "ratio_inverse",
    "spn_prefilter",
]

P_MIN = 0.05


def ggd_ratio(z):
    """Generalized Gaussian ratio ``h(z)``, evaluated through log-Gamma.

    Accepts scalars or arrays. Raises ``ValueError`` for ``z <= 0``.
    """
    z_arr = np.asarray(z, dtype=np.float64)
    if np.any(~(z_arr > 0)):
        raise ValueError("ggd_ratio is defined for z > 0 only")
    out = np.exp(gammaln(1.0 / z_arr) + gammaln(3.0 / z_arr) - 2.0 * gammaln(2.0 / z_arr))
    return float(out) if out.ndim == 0 else out


class RatioLookup:
    """Tabulated ``h`` on a uniform grid over ``[p_min, 2]`` for fast inversion.

    Inversion interpolates ``p`` linearly against ``log h(p)``, which is
    smooth and strictly decreasing on the grid.
    """

    def __init__(self, p_min=P_MIN, resolution=4096):
        if not 0 < p_min < 2:
            raise ValueError(f"p_min must lie in (0, 2), got {p_min}")
        if resolution < 2:
            raise ValueError("resolution must be at least 2")
        self.p_min = float(p_min)
        self.resolution = int(resolution)
        self.p = np.linspace(self.p_min, 2.0, self.resolution)
        self.h = ggd_ratio(self.p)
        # ascending order for np.interp
        self._log_h = np.log(self.h[::-1])
        self._p_rev = self.p[::-1]

    @property
    def h_max(self):
        return float(self.h[0])

    def __call__(self, rho):
        return ratio_inverse(rho, self)


_DEFAULT_LUT = None


def default_lookup():
    global _DEFAULT_LUT
    if _DEFAULT_LUT is None:
        _DEFAULT_LUT = RatioLookup()
    return _DEFAULT_LUT


def ratio_inverse(rho, lut=None):
    """Shape ``p`` with ``h(p) == rho``, clamped to ``[lut.p_min, 2]``.

    Works on scalars or arrays. NaN input raises ``ValueError``; values at or
    below ``h(2) = pi/2`` map to 2 and values at or above ``h(p_min)`` map to
    ``p_min``.
    """
    lut = default_lookup() if lut is None else lut
    rho_arr = np.asarray(rho, dtype=np.float64)
    if np.any(np.isnan(rho_arr)):
        raise ValueError("ratio_inverse received NaN")
    with np.errstate(divide="ignore"):
        log_rho = np.log(np.maximum(rho_arr, 0.0))
    p = np.interp(log_rho, lut._log_h, lut._p_rev, left=2.0, right=lut.p_min)
    return float(p) if p.ndim == 0 else p


def gradient_magnitudes(u):
    """Per-pixel Euclidean norm of the periodic forward-difference gradient."""
    g = gradient(u)
    return np.sqrt(g[0] ** 2 + g[1] ** 2)


def periodic_box_sum(x, size):
    """Sum of ``x`` over the centred ``size x size`` window with wrap-around.

    Plain shifted additions, so sums of non-negative data that are zero come
    out exactly zero. For windows larger than the image the wrap counts pixels
    more than once, consistent with periodic indexing.
    """
    half = size // 2
    rows = np.zeros_like(x)
    for k in range(-half, half + 1):
        rows += np.roll(x, k, axis=0)
    out = np.zeros_like(x)
    for k in range(-half, half + 1):
        out += np.roll(rows, k, axis=1)
    return out


def _check_window(s):
    if int(s) != s or s < 3 or s % 2 == 0:
        raise ValueError(f"window size must be an odd integer >= 3, got {s}")
    return int(s)


def local_shape(m, s, lut=None):
    """Estimate ``p`` per pixel from a grid of non-negative samples ``m``.

    ``rho_i = card(N) * sum(m_j**2) / (sum(m_j))**2`` over the ``s x s``
    periodic window; windows with zero sum get ``p = 2``.
    """
    s = _check_window(s)
    m = np.abs(np.asarray(m, dtype=np.float64))
    s1 = periodic_box_sum(m, s)
    s2 = periodic_box_sum(m * m, s)
    flat = s1 == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = np.where(flat, 0.0, (s * s) * s2 / np.where(flat, 1.0, s1) ** 2)
    p = ratio_inverse(rho, lut)
    return np.where(flat, 2.0, p)


def estimate_pmap(u, s=3, lut=None):
    """Space-variant exponent map of image ``u`` using ``s x s`` windows."""
    u = as_image(u)
    return local_shape(gradient_magnitudes(u), s, lut)


def global_shape(u, lut=None):
    """Single exponent for the whole image from the same moment ratio."""
    m = gradient_magnitudes(as_image(u)).ravel()
    total = m.sum()
    if total == 0:
        return 2.0
    rho = m.size * np.sum(m * m) / total**2
    return ratio_inverse(rho, lut)


def spn_prefilter(g, mask, min_fraction=0.1):
    """Replace masked pixels with the mean of clean pixels in a growing window.

    For each corrupted pixel the centred window starts at ``3 x 3`` and grows
    by 2 until it holds at least one clean pixel and at least
    ``min_fraction`` of its pixels are clean. Windows wrap periodically; once
    a window would exceed the image the mean over all clean pixels is used.
    Clean pixels are returned unchanged.
    """
    g = as_image(g)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != g.shape:
        raise ValueError(f"mask shape {mask.shape} does not match image shape {g.shape}")
    if mask.all():
        raise ValueError("mask covers every pixel; no clean data to fill from")
    out = g.copy()
    if not mask.any():
        return out

    clean = (~mask).astype(np.float64)
    clean_vals = np.where(mask, 0.0, g)
    todo = mask.copy()
    size = 3
    while todo.any():
        if size > max(g.shape):
            out[todo] = clean_vals.sum() / clean.sum()
            break
        count = periodic_box_sum(clean, size)
        total = periodic_box_sum(clean_vals, size)
        ok = todo & (count >= 1) & (count >= min_fraction * size * size)
        out[ok] = total[ok] / count[ok]
        todo &= ~ok
        size += 2
    return out


class PMapEstimator(TransformerMixin, BaseEstimator):
    """Transformer mapping an image to its space-variant exponent map.

    Parameters
    ----------
    window : int
        Odd neighbourhood size ``s >= 3``.
    p_min : float
        Lower clamp of the estimated exponents.
    resolution : int
        Number of samples in the ratio lookup table.
    """

    def __init__(self, window=3, p_min=P_MIN, resolution=4096):
        self.window = window
        self.p_min = p_min
        self.resolution = resolution

    def fit(self, X=None, y=None):
        _check_window(self.window)
        self.lookup_ = RatioLookup(self.p_min, self.resolution)
        return self

    def transform(self, X):
        check_is_fitted(self, "lookup_")
        return estimate_pmap(X, self.window, self.lookup_)


def p_to_unit(pmap, p_min=P_MIN):
    """Linear map of ``[p_min, 2]`` onto ``[0, 1]`` for grayscale previews."""
    return np.clip((np.asarray(pmap) - p_min) / (2.0 - p_min), 0.0, 1.0)


"""scikit-learn style front end for the TV / TV_p / TV_p^sv restoration models."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin, clone
from sklearn.utils.validation import check_is_fitted

from .degrade import isnr
from .operators import BlurOperator, as_image
from .pmap import P_MIN, RatioLookup, estimate_pmap, global_shape, spn_prefilter
from .solver import SolverConfig, noise_level, solve

__all__ = ["MODELS", "TVRestorer", "parse_model", "sweep_mu"]

MODELS = ("tv-l1", "tv-l2", "tvp-l1", "tvp-l2", "tvpsv-l1", "tvpsv-l2")


def parse_model(name):
    """Split ``"tvpsv-l2"`` into ``("tvpsv", 2)``."""
    if name not in MODELS:
        raise ValueError(f"unknown model {name!r}; choose from {', '.join(MODELS)}")
    family, fid = name.split("-")
    return family, int(fid[1])


def detect_impulses(g):
    """Pixels sitting exactly at 0 or 1, the salt-and-pepper values."""
    g = np.asarray(g)
    return (g == 0.0) | (g == 1.0)


class TVRestorer(TransformerMixin, BaseEstimator):
    """Deblur/denoise an image with a TV-type prior and L1 or L2 fidelity.

    ``fit`` validates the settings and builds the blur operator and ratio
    table; ``transform(g)`` restores an observed image ``g``. For L2 models
    without an explicit ``mu`` the weight follows the discrepancy principle
    and ``noise_sigma`` must be given. L1 models need ``mu``; their p-map and
    starting point come from the salt-and-pepper pre-filtered image.

    Parameters
    ----------
    model : str
        One of ``tv-l1, tv-l2, tvp-l1, tvp-l2, tvpsv-l1, tvpsv-l2``.
    blur_band, blur_sigma : int, float
        Gaussian blur; ``blur_band=1`` disables it.
    p : float, optional
        Global exponent for ``tvp-*``; estimated from the image when omitted.
    window : int
        Neighbourhood size for the space-variant p-map.
    mu : float, optional
        Fidelity weight. Required for L1 models.
    noise_sigma : float, optional
        AWGN standard deviation, used for the discrepancy bound.
    tau : float
        Safety factor on the discrepancy bound.
    beta_t, beta_r : float, optional
        ADMM penalties; model-dependent defaults when omitted.
    tol, max_iter : float, int
        Relative-change stopping threshold and iteration cap.
    p_min : float
        Lower clamp of estimated exponents.

    Attributes
    ----------
    blur_ : BlurOperator
    lookup_ : RatioLookup
    report_ : RestoreReport
        Diagnostics of the last ``transform`` call.
    pmap_ : ndarray
        Exponents used in the last ``transform`` call.
    """

    def __init__(
        self,
        model="tvpsv-l2",
        blur_band=5,
        blur_sigma=1.0,
        p=None,
        window=3,
        mu=None,
        noise_sigma=None,
        tau=1.0,
        beta_t=None,
        beta_r=None,
        tol=1e-4,
        max_iter=500,
        p_min=P_MIN,
    ):
        self.model = model
        self.blur_band = blur_band
        self.blur_sigma = blur_sigma
        self.p = p
        self.window = window
        self.mu = mu
        self.noise_sigma = noise_sigma
        self.tau = tau
        self.beta_t = beta_t
        self.beta_r = beta_r
        self.tol = tol
        self.max_iter = max_iter
        self.p_min = p_min

    def fit(self, X=None, y=None):
        family, q = parse_model(self.model)
        if q == 1 and self.mu is None:
            raise ValueError(f"{self.model} needs an explicit mu")
        if q == 2 and self.mu is None and self.noise_sigma is None:
            raise ValueError(f"{self.model} with automatic mu needs noise_sigma")
        if self.p is not None and not 0 < self.p <= 2:
            raise ValueError(f"p must lie in (0, 2], got {self.p}")
        self.family_, self.q_ = family, q
        self.blur_ = BlurOperator(self.blur_band, self.blur_sigma)
        self.lookup_ = RatioLookup(self.p_min)
        return self

    def _config(self, n):
        delta_bar = None
        if self.q_ == 2 and self.mu is None:
            delta_bar = noise_level(self.noise_sigma, n, self.tau)
        return SolverConfig(
            q=self.q_,
            mu=self.mu,
            delta_bar=delta_bar,
            beta_t=self.beta_t,
            beta_r=self.beta_r,
            tol=self.tol,
            max_iter=self.max_iter,
            tau=self.tau,
        )

    def exponents(self, source):
        """Exponent map this model uses for a given p-map source image."""
        check_is_fitted(self, "blur_")
        if self.family_ == "tv":
            return np.ones_like(source)
        if self.family_ == "tvp":
            p = self.p if self.p is not None else global_shape(source, self.lookup_)
            return np.full_like(source, p)
        return estimate_pmap(source, self.window, self.lookup_)

    def transform(self, X, mask=None, callback=None):
        """Restore the observed image ``X``; returns the restored array."""
        check_is_fitted(self, "blur_")
        g = as_image(X, "observed image")
        u0 = None
        source = g
        self.mask_ = None
        if self.q_ == 1:
            mask = detect_impulses(g) if mask is None else np.asarray(mask, dtype=bool)
            self.mask_ = mask
            u0 = source = spn_prefilter(g, mask)
        self.pmap_ = self.exponents(source)
        self.report_ = solve(g, self.blur_, self.pmap_, self._config(g.size), u0, callback)
        return self.report_.u_star

    def score(self, X, y):
        """ISNR (dB) of restoring observed ``X`` against the clean image ``y``."""
        return isnr(X, y, self.transform(X))


def sweep_mu(estimator, g, clean, mus, mask=None):
    """Restore ``g`` for every ``mu`` in ``mus``; pick the highest ISNR.

    Returns ``(best_mu, best_estimator, table)`` where ``table`` lists
    ``(mu, isnr)`` pairs in grid order. Ties keep the first grid value.
    """
    table = []
    best = None
    for mu in mus:
        est = clone(estimator).set_params(mu=float(mu)).fit()
        score = isnr(g, clean, est.transform(g, mask=mask))
        table.append((float(mu), score))
        if best is None or score > best[1]:
            best = (float(mu), score, est)
    if best is None:
        raise ValueError("empty mu grid")
    return best[0], best[2], table

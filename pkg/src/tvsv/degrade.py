"""Blur + noise degradation and the BSNR / ISNR quality metrics.

Random draws come from numpy's PCG64 generator seeded through
``SeedSequence(seed).spawn(3)``: stream 0 feeds the Gaussian noise, stream 1
the corruption mask and stream 2 the salt/pepper choice. The same seed
therefore always reproduces the same record on any platform.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .operators import as_image

__all__ = [
    "DegradationRecord",
    "NoiseSpec",
    "bsnr",
    "degrade",
    "degrade_awgn",
    "degrade_spn",
    "isnr",
    "sigma_for_bsnr",
]


@dataclass(frozen=True)
class NoiseSpec:
    """Noise model. AWGN takes exactly one of ``sigma`` / ``target_bsnr``; SPN takes ``gamma``."""

    kind: str
    sigma: Optional[float] = None
    target_bsnr: Optional[float] = None
    gamma: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        kind = self.kind.lower()
        object.__setattr__(self, "kind", kind)
        if kind == "awgn":
            if (self.sigma is None) == (self.target_bsnr is None):
                raise ValueError("AWGN needs exactly one of sigma or target_bsnr")
            if self.gamma is not None:
                raise ValueError("gamma only applies to SPN")
            if self.sigma is not None and self.sigma < 0:
                raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        elif kind == "spn":
            if self.gamma is None or not 0 <= self.gamma <= 1:
                raise ValueError(f"SPN needs gamma in [0, 1], got {self.gamma}")
            if self.sigma is not None or self.target_bsnr is not None:
                raise ValueError("sigma / target_bsnr only apply to AWGN")
        else:
            raise ValueError(f"unknown noise kind {self.kind!r}; expected 'awgn' or 'spn'")


@dataclass
class DegradationRecord:
    g: np.ndarray
    blurred: np.ndarray
    seed: int
    kind: str
    sigma: float = 0.0
    gamma: Optional[float] = None
    bsnr: float = float("inf")
    mask: Optional[np.ndarray] = field(default=None, repr=False)

    def metadata(self):
        meta = {"kind": self.kind, "seed": self.seed, "sigma": self.sigma, "bsnr": self.bsnr}
        if self.gamma is not None:
            meta["gamma"] = self.gamma
            meta["corrupted_fraction"] = float(self.mask.mean())
        return meta


def _streams(seed):
    return [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(seed).spawn(3)]


def sigma_for_bsnr(blurred, target_bsnr):
    """Noise std giving ``target_bsnr`` dB in expectation for the blurred image."""
    blurred = np.asarray(blurred, dtype=np.float64)
    spread = np.linalg.norm(blurred - blurred.mean())
    return float(spread / (np.sqrt(blurred.size) * 10.0 ** (target_bsnr / 20.0)))


def bsnr(g, u, blur):
    """Blurred signal-to-noise ratio of ``g`` in dB; ``inf`` when ``g == K u``."""
    ku = blur.apply(as_image(u))
    noise = np.sum((as_image(g, "g") - ku) ** 2)
    if noise == 0:
        return float("inf")
    return float(10.0 * np.log10(np.sum((ku - ku.mean()) ** 2) / noise))


def isnr(g, u, u_star):
    """Improvement in SNR (dB) of ``u_star`` over ``g`` w.r.t. clean ``u``; ``inf`` if exact."""
    g, u, u_star = as_image(g, "g"), as_image(u), as_image(u_star, "u_star")
    if not g.shape == u.shape == u_star.shape:
        raise ValueError("g, u and u_star must share a shape")
    err = np.sum((u_star - u) ** 2)
    if err == 0:
        return float("inf")
    return float(10.0 * np.log10(np.sum((g - u) ** 2) / err))


def degrade_awgn(u, blur, spec):
    """``g = K u + n`` with i.i.d. Gaussian ``n``."""
    if spec.kind != "awgn":
        raise ValueError("degrade_awgn needs an AWGN NoiseSpec")
    u = as_image(u)
    ku = blur.apply(u)
    sigma = spec.sigma if spec.sigma is not None else sigma_for_bsnr(ku, spec.target_bsnr)
    gauss, _, _ = _streams(spec.seed)
    g = ku + sigma * gauss.standard_normal(u.shape) if sigma > 0 else ku.copy()
    return DegradationRecord(
        g=g, blurred=ku, seed=spec.seed, kind="awgn", sigma=float(sigma), bsnr=bsnr(g, u, blur)
    )


def degrade_spn(u, blur, spec):
    """Blur, then set each pixel to 0 or 1 (equal odds) with probability ``gamma``."""
    if spec.kind != "spn":
        raise ValueError("degrade_spn needs an SPN NoiseSpec")
    u = as_image(u)
    ku = blur.apply(u)
    _, mask_rng, salt_rng = _streams(spec.seed)
    mask = mask_rng.random(u.shape) < spec.gamma
    salt = salt_rng.random(u.shape) < 0.5
    g = ku.copy()
    g[mask] = np.where(salt[mask], 1.0, 0.0)
    return DegradationRecord(
        g=g,
        blurred=ku,
        seed=spec.seed,
        kind="spn",
        gamma=float(spec.gamma),
        bsnr=bsnr(g, u, blur),
        mask=mask,
    )


def degrade(u, blur, spec):
    return degrade_awgn(u, blur, spec) if spec.kind == "awgn" else degrade_spn(u, blur, spec)

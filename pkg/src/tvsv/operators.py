"""Periodic first-order differences, Gaussian blur and their Fourier multipliers.

Images are 2-D float arrays of shape ``(height, width)``. A gradient field is a
``(2, height, width)`` array holding the horizontal and vertical forward
differences. All operators use periodic boundaries so that blur and
differences are diagonalised by the same 2-D DFT.
"""

import numpy as np

__all__ = [
    "BlurOperator",
    "as_image",
    "divergence",
    "gaussian_kernel",
    "gradient",
    "spectral_multipliers",
    "tv",
    "tvp",
]


def as_image(u, name="image"):
    """Return ``u`` as a finite 2-D float64 array or raise ``ValueError``."""
    arr = np.asarray(u, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def gradient(u):
    """Forward differences with wrap-around.

    Returns an array ``t`` of shape ``(2,) + u.shape`` where ``t[0]`` is the
    horizontal difference ``u[r, c+1] - u[r, c]`` and ``t[1]`` the vertical
    one ``u[r+1, c] - u[r, c]``.
    """
    u = np.asarray(u, dtype=np.float64)
    return np.stack([np.roll(u, -1, axis=1) - u, np.roll(u, -1, axis=0) - u])


def divergence(t):
    """Adjoint of :func:`gradient`, i.e. ``D^T t`` (the negative divergence)."""
    t = np.asarray(t, dtype=np.float64)
    if t.ndim != 3 or t.shape[0] != 2:
        raise ValueError(f"gradient field must have shape (2, h, w), got {t.shape}")
    th, tv_ = t
    return (np.roll(th, 1, axis=1) - th) + (np.roll(tv_, 1, axis=0) - tv_)


def tv(u):
    """Isotropic total variation ``sum_i ||(grad u)_i||_2``."""
    g = gradient(u)
    return float(np.sum(np.hypot(g[0], g[1])))


def tvp(u, p):
    """Space-variant TV_p: ``sum_i ||(grad u)_i||_2 ** p_i``.

    ``p`` may be a scalar or an array with the image shape.
    """
    g = gradient(u)
    return float(np.sum(np.hypot(g[0], g[1]) ** np.asarray(p, dtype=np.float64)))


def gaussian_kernel(band, sigma):
    """Gaussian PSF truncated to ``band x band`` and normalised to unit sum."""
    band = int(band)
    if band < 1 or band % 2 == 0:
        raise ValueError(f"band must be a positive odd integer, got {band}")
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    half = band // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    k = np.exp(-(x[:, None] ** 2 + x[None, :] ** 2) / (2.0 * sigma**2))
    return k / k.sum()


def _psf_to_otf(kernel, shape):
    # Wrap the centred kernel so that its centre sits at index (0, 0).
    d1, d2 = shape
    psf = np.zeros(shape)
    half_r, half_c = kernel.shape[0] // 2, kernel.shape[1] // 2
    rows = (np.arange(kernel.shape[0]) - half_r) % d1
    cols = (np.arange(kernel.shape[1]) - half_c) % d2
    np.add.at(psf, (rows[:, None], cols[None, :]), kernel)
    return np.fft.fft2(psf)


class BlurOperator:
    """Periodic convolution with a truncated Gaussian PSF.

    Parameters
    ----------
    band : int
        Odd kernel width; ``band=1`` is the identity.
    sigma : float
        Standard deviation of the Gaussian, in pixels.
    shape : tuple of int, optional
        Bind the operator to one image size. Applying it to an image of
        another size then raises ``ValueError``. When omitted, multipliers are
        computed and cached lazily for every size encountered.
    """

    def __init__(self, band=5, sigma=1.0, shape=None):
        self.band = int(band)
        self.sigma = float(sigma)
        self.kernel = gaussian_kernel(self.band, self.sigma)
        self.shape = None if shape is None else tuple(int(s) for s in shape)
        self._otf = {}
        if self.shape is not None:
            self.multiplier(self.shape)

    def __repr__(self):
        return f"BlurOperator(band={self.band}, sigma={self.sigma})"

    def multiplier(self, shape):
        """Eigenvalues of the periodic convolution on a grid of ``shape``."""
        shape = tuple(int(s) for s in shape)
        if self.shape is not None and shape != self.shape:
            raise ValueError(
                f"blur operator is bound to shape {self.shape}, got image of shape {shape}"
            )
        otf = self._otf.get(shape)
        if otf is None:
            otf = _psf_to_otf(self.kernel, shape)
            self._otf[shape] = otf
        return otf

    def apply(self, u):
        u = np.asarray(u, dtype=np.float64)
        return np.real(np.fft.ifft2(np.fft.fft2(u) * self.multiplier(u.shape)))

    __call__ = apply

    def adjoint(self, v):
        v = np.asarray(v, dtype=np.float64)
        return np.real(np.fft.ifft2(np.fft.fft2(v) * np.conj(self.multiplier(v.shape))))


def spectral_multipliers(blur, shape):
    """Fourier multipliers ``(K, D_h, D_v)`` for a ``shape`` grid.

    Every operator is a periodic convolution, so ``fft2(op(u)) == M * fft2(u)``
    for the corresponding multiplier ``M``.
    """
    d1, d2 = shape
    k_hat = blur.multiplier(shape) if blur is not None else np.ones(shape, dtype=complex)
    dh = np.zeros(shape)
    dh[0, 0] = -1.0
    dh[0, -1 % d2] += 1.0
    dv = np.zeros(shape)
    dv[0, 0] = -1.0
    dv[-1 % d1, 0] += 1.0
    return k_hat, np.fft.fft2(dh), np.fft.fft2(dv)

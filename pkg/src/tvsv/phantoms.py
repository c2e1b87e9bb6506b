"""Built-in test images with intensities in [0, 1]."""

import numpy as np

__all__ = ["geometric", "texture", "load_phantom"]


def geometric(size=64):
    """Piecewise-constant phantom: rectangles, a disk, a ring and a triangle."""
    n = int(size)
    y, x = np.mgrid[0:n, 0:n] / n
    img = np.full((n, n), 0.15)
    img[(x > 0.08) & (x < 0.45) & (y > 0.10) & (y < 0.40)] = 0.85
    img[(x > 0.20) & (x < 0.32) & (y > 0.18) & (y < 0.32)] = 0.45
    img[(x - 0.70) ** 2 + (y - 0.28) ** 2 < 0.17**2] = 0.60
    r2 = (x - 0.30) ** 2 + (y - 0.72) ** 2
    img[(r2 < 0.20**2) & (r2 > 0.12**2)] = 0.95
    img[(y > 0.55) & (y < 0.92) & (x > 0.58) & (x < 0.92) & (x - 0.58 > 0.92 - y)] = 0.35
    return img


def texture(size=64, seed=0):
    """Smooth random texture: sum of a few oriented sinusoids, rescaled to [0.1, 0.9]."""
    n = int(size)
    rng = np.random.default_rng(seed)
    y, x = np.mgrid[0:n, 0:n] / n
    img = np.zeros((n, n))
    for _ in range(6):
        fx, fy = rng.integers(1, 9, size=2)
        phase = rng.uniform(0, 2 * np.pi)
        img += rng.uniform(0.3, 1.0) * np.sin(2 * np.pi * (fx * x + fy * y) + phase)
    img -= img.min()
    return 0.1 + 0.8 * img / img.max()


def load_phantom(spec):
    """Parse ``"geometric"``, ``"texture"`` or ``"name:size"`` into an image."""
    name, _, size = str(spec).partition(":")
    size = int(size) if size else 64
    if name == "geometric":
        return geometric(size)
    if name == "texture":
        return texture(size)
    raise ValueError(f"unknown phantom {name!r}; expected 'geometric' or 'texture'")

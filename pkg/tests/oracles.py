"""Slow, independent reference implementations used as test oracles."""

import numpy as np


def dense_difference_matrices(d1, d2):
    """Explicit periodic forward-difference matrices acting on row-major vectors."""
    n = d1 * d2
    dh = np.zeros((n, n))
    dv = np.zeros((n, n))
    for r in range(d1):
        for c in range(d2):
            i = r * d2 + c
            dh[i, i] -= 1.0
            dh[i, r * d2 + (c + 1) % d2] += 1.0
            dv[i, i] -= 1.0
            dv[i, ((r + 1) % d1) * d2 + c] += 1.0
    return dh, dv


def dense_blur_matrix(kernel, d1, d2):
    """Periodic convolution with a centred kernel as an explicit n x n matrix."""
    n = d1 * d2
    k = np.zeros((n, n))
    hr, hc = kernel.shape[0] // 2, kernel.shape[1] // 2
    for r in range(d1):
        for c in range(d2):
            i = r * d2 + c
            for a in range(kernel.shape[0]):
                for b in range(kernel.shape[1]):
                    j = ((r - (a - hr)) % d1) * d2 + (c - (b - hc)) % d2
                    k[i, j] += kernel[a, b]
    return k


def direct_convolution(u, kernel):
    """O(n * band^2) periodic convolution by explicit index arithmetic."""
    d1, d2 = u.shape
    hr, hc = kernel.shape[0] // 2, kernel.shape[1] // 2
    out = np.zeros_like(u)
    for r in range(d1):
        for c in range(d2):
            acc = 0.0
            for a in range(kernel.shape[0]):
                for b in range(kernel.shape[1]):
                    acc += kernel[a, b] * u[(r - (a - hr)) % d1, (c - (b - hc)) % d2]
            out[r, c] = acc
    return out


def brute_prefilter(g, mask, min_fraction=0.1):
    """Nested-loop version of the growing-window clean-pixel mean."""
    d1, d2 = g.shape
    out = g.copy()
    clean_all = g[~mask]
    for r in range(d1):
        for c in range(d2):
            if not mask[r, c]:
                continue
            size = 3
            while True:
                if size > max(d1, d2):
                    out[r, c] = clean_all.mean()
                    break
                h = size // 2
                vals = []
                for a in range(-h, h + 1):
                    for b in range(-h, h + 1):
                        rr, cc = (r + a) % d1, (c + b) % d2
                        if not mask[rr, cc]:
                            vals.append(g[rr, cc])
                if len(vals) >= 1 and len(vals) >= min_fraction * size * size:
                    out[r, c] = np.mean(vals)
                    break
                size += 2
    return out


def grid_prox_objective(a, p, beta, points=1_000_001):
    """Minimum of xi**p + beta/2 (xi - a)**2 over a dense grid on [0, a]."""
    xi = np.linspace(0.0, a, points)
    return float(np.min(xi**p + 0.5 * beta * (xi - a) ** 2))

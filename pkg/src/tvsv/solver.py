"""ADMM solver for the TV_p^sv-L_q restoration models, q in {1, 2}.

The splitting ``r = K u - g``, ``t = D u`` gives per-iteration updates in the
order r, t, u, lambda_r, lambda_t. The u-update is an exact Fourier-domain
solve (periodic operators); the t-update is the per-pixel proximal map of
``xi ** p_i`` applied to the gradient magnitude.
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .operators import as_image, gradient, spectral_multipliers

__all__ = [
    "AdmmState",
    "RestoreReport",
    "SolverConfig",
    "SolverDivergence",
    "admm_step",
    "lp_shrink",
    "noise_level",
    "objective",
    "r_step_l1",
    "r_step_l2_discrepancy",
    "r_step_l2_fixed",
    "solve",
    "t_step",
    "u_step",
]

logger = logging.getLogger(__name__)

# (beta_t, beta_r) for intensities in [0, 1]
DEFAULT_BETAS = {1: (10.0, 5.0), 2: (50.0, 50.0)}
TIE_TOL = 1e-12


class SolverDivergence(RuntimeError):
    """An ADMM iterate became non-finite."""

    def __init__(self, iteration, message=None):
        self.iteration = iteration
        super().__init__(message or f"non-finite iterate at iteration {iteration}")


@dataclass
class SolverConfig:
    """ADMM settings.

    ``mu=None`` with ``q=2`` selects the discrepancy-principle update and then
    needs ``delta_bar``. ``q=1`` always needs an explicit ``mu``. Penalties
    left as ``None`` default to ``(beta_t, beta_r) = (10, 5)`` for q=1 and
    ``(50, 50)`` for q=2.
    """

    q: int = 2
    mu: Optional[float] = None
    delta_bar: Optional[float] = None
    beta_t: Optional[float] = None
    beta_r: Optional[float] = None
    tol: float = 1e-4
    max_iter: int = 500
    tau: float = 1.0

    def __post_init__(self):
        if self.q not in (1, 2):
            raise ValueError(f"q must be 1 or 2, got {self.q}")
        bt, br = DEFAULT_BETAS[self.q]
        if self.beta_t is None:
            self.beta_t = bt
        if self.beta_r is None:
            self.beta_r = br
        if not (self.beta_t > 0 and self.beta_r > 0):
            raise ValueError("beta_t and beta_r must be positive")
        if self.q == 1 and self.mu is None:
            raise ValueError("q=1 requires an explicit mu")
        if self.mu is not None and self.mu < 0:
            raise ValueError(f"mu must be >= 0, got {self.mu}")
        if self.q == 2 and self.mu is None:
            if self.delta_bar is None or self.delta_bar < 0:
                raise ValueError("automatic mu (q=2) requires delta_bar >= 0")
        if self.tol <= 0 or self.max_iter < 1:
            raise ValueError("tol must be positive and max_iter >= 1")

    @property
    def auto_mu(self):
        return self.q == 2 and self.mu is None


@dataclass
class AdmmState:
    u: np.ndarray
    r: np.ndarray
    t: np.ndarray
    lambda_r: np.ndarray
    lambda_t: np.ndarray
    mu: float
    iteration: int = 0

    @classmethod
    def initial(cls, g, blur, u0=None, mu=0.0):
        u = (g if u0 is None else as_image(u0, "u0")).copy()
        ku = blur.apply(u) if blur is not None else u
        return cls(
            u=u,
            r=ku - g,
            t=gradient(u),
            lambda_r=np.zeros_like(g),
            lambda_t=np.zeros((2,) + g.shape),
            mu=float(mu),
        )


@dataclass
class RestoreReport:
    u_star: np.ndarray
    iterations: int
    converged: bool
    rel_change: float
    r_norm: float
    discrepancy: float
    delta_bar: Optional[float]
    mu: float
    wall_time: float
    rel_changes: List[float] = field(default_factory=list)
    r_norms: List[float] = field(default_factory=list)
    mu_history: List[float] = field(default_factory=list)
    mu_infinite: bool = False
    constraint_r: float = float("nan")
    constraint_t: float = float("nan")

    def summary(self):
        """JSON-ready dict without the image."""
        mus = [m for m in self.mu_history if np.isfinite(m)]
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "rel_change": self.rel_change,
            "r_norm": self.r_norm,
            "discrepancy": self.discrepancy,
            "delta_bar": self.delta_bar,
            "mu": self.mu if np.isfinite(self.mu) else "inf",
            "mu_min": min(mus) if mus else None,
            "mu_max": max(mus) if mus else None,
            "mu_infinite": self.mu_infinite,
            "constraint_r": self.constraint_r,
            "constraint_t": self.constraint_t,
            "wall_time": self.wall_time,
        }


def noise_level(sigma, n, tau=1.0):
    """Expected l2 norm of an n-pixel AWGN realisation, scaled by ``tau``."""
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    return float(tau * sigma * np.sqrt(n))


def r_step_l1(v, mu, beta_r):
    """Soft-thresholding ``sign(v) * max(|v| - mu/beta_r, 0)``."""
    return np.sign(v) * np.maximum(np.abs(v) - mu / beta_r, 0.0)


def r_step_l2_fixed(v, mu, beta_r):
    return (beta_r / (beta_r + mu)) * v


def r_step_l2_discrepancy(v, beta_r, delta_bar):
    """Residual update that pins ``||r||_2`` to at most ``delta_bar``.

    Returns ``(r, mu)``. With ``delta_bar == 0`` and ``v != 0`` the multiplier
    is unbounded: ``r`` is zero and ``mu`` is ``inf``.
    """
    norm_v = float(np.linalg.norm(v))
    if norm_v <= delta_bar:
        return v.copy(), 0.0
    if delta_bar == 0:
        return np.zeros_like(v), float("inf")
    return (delta_bar / norm_v) * v, beta_r * (norm_v / delta_bar - 1.0)


def _dphi(x, a, p, beta):
    return p * x ** (p - 1.0) + beta * (x - a)


def _d2phi(x, p, beta):
    return p * (p - 1.0) * x ** (p - 2.0) + beta


def _bracketed_root(a, p, beta, lo, hi, max_iter=100):
    """Root of ``p x^(p-1) + beta (x - a)`` in ``(lo, hi)``; Newton with bisection fallback."""
    x = 0.5 * (lo + hi)
    for _ in range(max_iter):
        fx = _dphi(x, a, p, beta)
        neg = fx < 0
        lo = np.where(neg, x, lo)
        hi = np.where(neg, hi, x)
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = x - fx / _d2phi(x, p, beta)
        ok = (fx == 0) | (np.isfinite(newton) & (newton > lo) & (newton < hi))
        x_new = np.where(ok, newton, 0.5 * (lo + hi))
        step = np.abs(x_new - x)
        x = x_new
        if np.all(step <= 4 * np.finfo(float).eps * np.maximum(x, 1e-300)):
            break
    return x


def lp_shrink(a, p, beta):
    """Minimiser over ``xi >= 0`` of ``xi**p + (beta/2) (xi - a)**2``, elementwise.

    ``a`` are non-negative magnitudes, ``p`` exponents in ``(0, 2]`` (scalar or
    array). For ``p < 1`` the problem is nonconvex: the interior local minimum
    is compared with ``xi = 0`` and ties (within 1e-12) go to zero.
    """
    a = np.asarray(a, dtype=np.float64)
    p = np.broadcast_to(np.asarray(p, dtype=np.float64), a.shape)
    xi = np.zeros_like(a)
    pos = a > 0

    sel = pos & (p == 2.0)
    xi[sel] = beta * a[sel] / (beta + 2.0)
    sel = pos & (p == 1.0)
    xi[sel] = np.maximum(a[sel] - 1.0 / beta, 0.0)

    sel = pos & (p > 1.0) & (p < 2.0)
    if sel.any():
        aa, pp = a[sel], p[sel]
        xi[sel] = _bracketed_root(aa, pp, beta, np.zeros_like(aa), aa.copy())

    sel = pos & (p < 1.0)
    if sel.any():
        aa, pp = a[sel], p[sel]
        # inflection point of the objective; the local minimum lies to its right
        x_star = (pp * (1.0 - pp) / beta) ** (1.0 / (2.0 - pp))
        cand = (x_star < aa) & (_dphi(x_star, aa, pp, beta) < 0)
        out = np.zeros_like(aa)
        if cand.any():
            ac, pc = aa[cand], pp[cand]
            root = _bracketed_root(ac, pc, beta, x_star[cand], ac.copy())
            f_root = root**pc + 0.5 * beta * (root - ac) ** 2
            f_zero = 0.5 * beta * ac**2
            out[cand] = np.where(f_root < f_zero - TIE_TOL, root, 0.0)
        xi[sel] = out
    return xi


def t_step(w, pmap, beta_t):
    """Per-pixel prox of ``||t_i||^p_i``: shrink each 2-vector ``w_i`` along its direction."""
    w = np.asarray(w, dtype=np.float64)
    a = np.sqrt(w[0] ** 2 + w[1] ** 2)
    xi = lp_shrink(a, pmap, beta_t)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(a > 0, xi / np.where(a > 0, a, 1.0), 0.0)
    return w * scale


def u_step(r, t, lambda_r, lambda_t, g, blur, beta_r, beta_t, multipliers=None):
    """Solve ``(beta_t D^T D + beta_r K^T K) u = D^T(beta_t t - lambda_t) + K^T(beta_r (r+g) - lambda_r)``."""
    if not beta_r > 0:
        raise ValueError("beta_r must be positive; the u-system is singular otherwise")
    k_hat, dh_hat, dv_hat = multipliers or spectral_multipliers(blur, g.shape)
    zt = np.fft.fft2(beta_t * np.asarray(t) - np.asarray(lambda_t), axes=(-2, -1))
    zr = np.fft.fft2(beta_r * (r + g) - lambda_r)
    rhs = np.conj(dh_hat) * zt[0] + np.conj(dv_hat) * zt[1] + np.conj(k_hat) * zr
    denom = beta_t * (np.abs(dh_hat) ** 2 + np.abs(dv_hat) ** 2) + beta_r * np.abs(k_hat) ** 2
    return np.real(np.fft.ifft2(rhs / denom))


def objective(u, g, blur, pmap, mu, q):
    """``sum ||(grad u)_i||^p_i + (mu/q) ||K u - g||_q^q``."""
    gu = gradient(u)
    reg = np.sum(np.sqrt(gu[0] ** 2 + gu[1] ** 2) ** np.asarray(pmap, dtype=np.float64))
    res = (blur.apply(u) if blur is not None else u) - g
    return float(reg + mu / q * np.sum(np.abs(res) ** q))


def admm_step(state, g, blur, pmap, cfg, multipliers=None):
    """One r, t, u, lambda_r, lambda_t cycle; mutates and returns ``state``."""
    apply_k = blur.apply if blur is not None else (lambda x: x)
    beta_r, beta_t = cfg.beta_r, cfg.beta_t

    v = apply_k(state.u) - g + state.lambda_r / beta_r
    if cfg.q == 1:
        state.r = r_step_l1(v, cfg.mu, beta_r)
        state.mu = cfg.mu
    elif cfg.auto_mu:
        state.r, state.mu = r_step_l2_discrepancy(v, beta_r, cfg.delta_bar)
    else:
        state.r = r_step_l2_fixed(v, cfg.mu, beta_r)
        state.mu = cfg.mu

    w = gradient(state.u) + state.lambda_t / beta_t
    state.t = t_step(w, pmap, beta_t)

    state.u = u_step(
        state.r, state.t, state.lambda_r, state.lambda_t, g, blur, beta_r, beta_t, multipliers
    )

    state.lambda_r = state.lambda_r - beta_r * (state.r - (apply_k(state.u) - g))
    state.lambda_t = state.lambda_t - beta_t * (state.t - gradient(state.u))
    state.iteration += 1
    return state


def solve(
    g,
    blur,
    pmap,
    cfg: SolverConfig,
    u0=None,
    callback: Optional[Callable[[int, float, float, float], None]] = None,
) -> RestoreReport:
    """Run ADMM until the relative change of ``u`` drops below ``cfg.tol``.

    Parameters
    ----------
    g : ndarray
        Observed image.
    blur : BlurOperator or None
        Forward operator ``K``; ``None`` means identity (pure denoising).
    pmap : float or ndarray
        Exponent(s) ``p_i`` of the regulariser.
    cfg : SolverConfig
    u0 : ndarray, optional
        Starting image, ``g`` by default.
    callback : callable, optional
        Called after every iteration with ``(iteration, rel_change, ||r||_2, mu)``.

    Raises
    ------
    SolverDivergence
        If an iterate becomes non-finite.
    """
    g = as_image(g, "g")
    pmap = np.broadcast_to(np.asarray(pmap, dtype=np.float64), g.shape)
    if np.any(~(pmap > 0)) or np.any(pmap > 2):
        raise ValueError("p values must lie in (0, 2]")
    multipliers = spectral_multipliers(blur, g.shape)
    state = AdmmState.initial(g, blur, u0)

    start = time.perf_counter()
    rel_changes, r_norms, mus = [], [], []
    converged = False
    rel = float("inf")
    for _ in range(cfg.max_iter):
        u_prev = state.u
        admm_step(state, g, blur, pmap, cfg, multipliers)
        if not np.all(np.isfinite(state.u)):
            raise SolverDivergence(state.iteration)
        prev_norm = np.linalg.norm(u_prev)
        diff = np.linalg.norm(state.u - u_prev)
        rel = float(diff / prev_norm) if prev_norm > 0 else float(diff)
        r_norm = float(np.linalg.norm(state.r))
        rel_changes.append(rel)
        r_norms.append(r_norm)
        mus.append(state.mu)
        if callback is not None:
            callback(state.iteration, rel, r_norm, state.mu)
        if rel < cfg.tol:
            converged = True
            break
    wall = time.perf_counter() - start
    if not converged:
        logger.warning("ADMM stopped at max_iter=%d (rel change %.3e)", cfg.max_iter, rel)

    ku = blur.apply(state.u) if blur is not None else state.u
    return RestoreReport(
        u_star=state.u,
        iterations=state.iteration,
        converged=converged,
        rel_change=rel,
        r_norm=r_norms[-1],
        discrepancy=float(np.linalg.norm(ku - g)),
        delta_bar=cfg.delta_bar if cfg.auto_mu else None,
        mu=state.mu,
        wall_time=wall,
        rel_changes=rel_changes,
        r_norms=r_norms,
        mu_history=mus,
        mu_infinite=any(np.isinf(m) for m in mus),
        constraint_r=float(np.linalg.norm(state.r - (ku - g))),
        constraint_t=float(np.linalg.norm(state.t - gradient(state.u))),
    )

import cvxpy as cp
import numpy as np
import pytest

import tvsv.solver as solver_mod
from oracles import dense_blur_matrix, dense_difference_matrices, grid_prox_objective
from tvsv.operators import BlurOperator, gradient
from tvsv.solver import (
    AdmmState,
    SolverConfig,
    SolverDivergence,
    admm_step,
    lp_shrink,
    noise_level,
    objective,
    r_step_l1,
    r_step_l2_discrepancy,
    r_step_l2_fixed,
    solve,
    t_step,
    u_step,
)


def prox_value(xi, a, p, beta):
    return xi**p + 0.5 * beta * (xi - a) ** 2


# --- r-step ---------------------------------------------------------------


def test_r_step_l1_examples():
    out = r_step_l1(np.array([3.0, -3.0, 0.5, -0.5, 0.0]), mu=2.0, beta_r=1.0)
    np.testing.assert_array_equal(out, [1.0, -1.0, 0.0, 0.0, 0.0])


def test_r_step_l1_grid_oracle():
    mu, beta = 1.5, 2.0
    grid = np.linspace(-6, 6, 1_200_001)
    for v in (-4.0, -0.5, 0.0, 0.3, 0.75, 2.2, 5.0):
        best = grid[np.argmin(mu * np.abs(grid) + 0.5 * beta * (grid - v) ** 2)]
        assert r_step_l1(np.array(v), mu, beta) == pytest.approx(best, abs=1e-6)


def test_r_step_l2_fixed():
    v = np.array([2.0, -4.0])
    np.testing.assert_allclose(r_step_l2_fixed(v, 1.0, 1.0), v / 2)
    np.testing.assert_array_equal(r_step_l2_fixed(v, 0.0, 3.0), v)


def test_discrepancy_inside_ball_keeps_v():
    v = np.array([0.3, 0.4])  # ||v|| = 0.5
    r, mu = r_step_l2_discrepancy(v, beta_r=2.0, delta_bar=1.0)
    np.testing.assert_array_equal(r, v)
    assert mu == 0.0


def test_discrepancy_projects_onto_ball():
    v = np.array([3.0, 4.0])
    r, mu = r_step_l2_discrepancy(v, beta_r=2.0, delta_bar=1.0)
    np.testing.assert_allclose(r, [0.6, 0.8])
    assert mu == pytest.approx(2.0 * (5.0 - 1.0))
    # same point the fixed-mu scaling gives with that mu
    np.testing.assert_allclose(r_step_l2_fixed(v, mu, 2.0), r, rtol=1e-12)


def test_discrepancy_zero_bound():
    r, mu = r_step_l2_discrepancy(np.array([1.0, 0.0]), beta_r=1.0, delta_bar=0.0)
    assert np.all(r == 0) and mu == float("inf")
    r, mu = r_step_l2_discrepancy(np.zeros(2), beta_r=1.0, delta_bar=0.0)
    assert np.all(r == 0) and mu == 0.0


def test_noise_level():
    assert noise_level(0.1, 10000) == pytest.approx(10.0)
    assert noise_level(0.1, 10000, tau=1.05) == pytest.approx(10.5)
    n = np.random.default_rng(0).standard_normal((256, 256)) * 0.2
    assert abs(np.linalg.norm(n) / noise_level(0.2, n.size) - 1) < 0.02
    with pytest.raises(ValueError):
        noise_level(-1.0, 4)


# --- t-step ---------------------------------------------------------------


def test_t_step_p1_is_vector_soft_threshold():
    w = np.zeros((2, 1, 2))
    w[:, 0, 0] = [3.0, 4.0]
    w[:, 0, 1] = [0.1, 0.0]
    t = t_step(w, 1.0, beta_t=1.0)
    np.testing.assert_allclose(t[:, 0, 0], [3.0 * 0.8, 4.0 * 0.8])
    np.testing.assert_array_equal(t[:, 0, 1], [0.0, 0.0])


def test_t_step_p2_closed_form():
    w = np.zeros((2, 1, 1))
    w[0, 0, 0] = 2.0
    assert t_step(w, 2.0, beta_t=2.0)[0, 0, 0] == pytest.approx(1.0)


def test_t_step_keeps_direction_and_zero():
    rng = np.random.default_rng(1)
    w = rng.standard_normal((2, 6, 6))
    w[:, 0, 0] = 0.0
    p = rng.uniform(0.2, 2.0, (6, 6))
    t = t_step(w, p, beta_t=5.0)
    assert np.all(t[:, 0, 0] == 0)
    cross = t[0] * w[1] - t[1] * w[0]
    np.testing.assert_allclose(cross, 0, atol=1e-14)
    assert np.all(t[0] * w[0] + t[1] * w[1] >= 0)


@pytest.mark.parametrize("p", [0.3, 0.5, 0.8, 1.0, 1.5, 2.0])
@pytest.mark.parametrize("beta", [1.0, 10.0])
def test_lp_shrink_against_grid(p, beta):
    for a in (0.01, 0.1, 1.0, 10.0):
        xi = lp_shrink(np.array([a]), p, beta)[0]
        assert 0 <= xi <= a
        assert prox_value(xi, a, p, beta) <= grid_prox_objective(a, p, beta) + 1e-8


def test_lp_shrink_nonconvex_zero_branch():
    # p=0.5, beta=1, a=1: interior stationary value beats zero only for larger a
    xi = lp_shrink(np.array([0.5, 5.0]), 0.5, 1.0)
    assert xi[0] == 0.0
    assert xi[1] > 0 and prox_value(xi[1], 5.0, 0.5, 1.0) < 0.5 * 25


# --- u-step ---------------------------------------------------------------


def dense_u_system(blur, shape, beta_r, beta_t):
    k = dense_blur_matrix(blur.kernel, *shape)
    dh, dv = dense_difference_matrices(*shape)
    a = beta_t * (dh.T @ dh + dv.T @ dv) + beta_r * k.T @ k
    return a, k, dh, dv


def test_u_step_recovers_consistent_split():
    rng = np.random.default_rng(2)
    blur = BlurOperator(3, 1.0)
    u = rng.random((8, 8))
    g = rng.random((8, 8))
    r = blur.apply(u) - g
    t = gradient(u)
    out = u_step(r, t, np.zeros_like(g), np.zeros_like(t), g, blur, 3.0, 2.0)
    np.testing.assert_allclose(out, u, atol=1e-10)


def test_u_step_matches_dense_solve():
    rng = np.random.default_rng(3)
    blur = BlurOperator(3, 1.2)
    shape = (6, 7)
    g, r, lr = (rng.standard_normal(shape) for _ in range(3))
    t, lt = rng.standard_normal((2,) + shape), rng.standard_normal((2,) + shape)
    br, bt = 4.0, 2.5
    a, k, dh, dv = dense_u_system(blur, shape, br, bt)
    rhs = dh.T @ (bt * t[0] - lt[0]).ravel() + dv.T @ (bt * t[1] - lt[1]).ravel()
    rhs += k.T @ (br * (r + g) - lr).ravel()
    out = u_step(r, t, lr, lt, g, blur, br, bt).ravel()
    assert np.linalg.norm(a @ out - rhs) <= 1e-9 * np.linalg.norm(rhs)
    np.testing.assert_allclose(out, np.linalg.solve(a, rhs), atol=1e-8)


def test_u_step_rejects_zero_beta_r():
    z = np.zeros((4, 4))
    with pytest.raises(ValueError):
        u_step(z, np.zeros((2, 4, 4)), z, np.zeros((2, 4, 4)), z, None, 0.0, 1.0)


# --- full iterations ------------------------------------------------------


def test_one_iteration_matches_hand_computation():
    rng = np.random.default_rng(4)
    shape = (5, 6)
    blur = BlurOperator(3, 1.0)
    g = rng.random(shape)
    pmap = rng.uniform(0.5, 2.0, shape)
    cfg = SolverConfig(q=2, mu=3.0, beta_t=2.0, beta_r=1.5)
    a, k, dh, dv = dense_u_system(blur, shape, cfg.beta_r, cfg.beta_t)
    gv = g.ravel()

    # state after one cycle r, t, u, lambda_r, lambda_t from u0 = g, zero multipliers
    v = k @ gv - gv
    r = cfg.beta_r / (cfg.beta_r + cfg.mu) * v
    w = np.stack([(dh @ gv).reshape(shape), (dv @ gv).reshape(shape)])
    t = t_step(w, pmap, cfg.beta_t)
    rhs = cfg.beta_t * (dh.T @ t[0].ravel() + dv.T @ t[1].ravel()) + cfg.beta_r * k.T @ (r + gv)
    u = np.linalg.solve(a, rhs)
    lam_r = -cfg.beta_r * (r - (k @ u - gv))
    lam_t = -cfg.beta_t * (t - np.stack([(dh @ u).reshape(shape), (dv @ u).reshape(shape)]))

    state = admm_step(AdmmState.initial(g, blur), g, blur, pmap, cfg)
    np.testing.assert_allclose(state.r.ravel(), r, atol=1e-12)
    np.testing.assert_allclose(state.t, t, atol=1e-12)
    np.testing.assert_allclose(state.u.ravel(), u, atol=1e-10)
    np.testing.assert_allclose(state.lambda_r.ravel(), lam_r, atol=1e-10)
    np.testing.assert_allclose(state.lambda_t, lam_t, atol=1e-10)
    assert state.iteration == 1


def test_constant_image_is_fixed_point():
    g = np.full((8, 8), 0.4)
    for q, kw in ((2, dict(delta_bar=0.1)), (2, dict(mu=5.0)), (1, dict(mu=1.0))):
        rep = solve(g, BlurOperator(5, 1.0), 0.7, SolverConfig(q=q, **kw))
        np.testing.assert_allclose(rep.u_star, g, atol=1e-12)
        assert rep.converged and rep.iterations == 1


def test_identity_blur_is_denoising():
    rng = np.random.default_rng(5)
    g = rng.random((8, 8))
    rep = solve(g, None, 1.0, SolverConfig(q=2, mu=1e6, tol=1e-10, max_iter=2000))
    np.testing.assert_allclose(rep.u_star, g, atol=1e-4)


def test_callback_and_report():
    rng = np.random.default_rng(6)
    g = rng.random((16, 16))
    log = []
    cfg = SolverConfig(q=2, delta_bar=0.5)
    rep = solve(g, BlurOperator(3, 1.0), 1.0, cfg, callback=lambda *a: log.append(a))
    assert len(log) == rep.iterations == len(rep.rel_changes)
    assert [entry[0] for entry in log] == list(range(1, rep.iterations + 1))
    summary = rep.summary()
    assert summary["iterations"] == rep.iterations
    assert "u_star" not in summary


def test_max_iter_flags_non_convergence(caplog):
    g = np.random.default_rng(7).random((16, 16))
    rep = solve(g, BlurOperator(3, 1.0), 0.8, SolverConfig(q=2, delta_bar=0.2, max_iter=3))
    assert rep.iterations == 3 and not rep.converged
    assert "max_iter" in caplog.text


def test_divergence_is_reported(monkeypatch):
    g = np.random.default_rng(8).random((8, 8))
    monkeypatch.setattr(solver_mod, "u_step", lambda *a, **k: np.full((8, 8), np.nan))
    with pytest.raises(SolverDivergence) as info:
        solve(g, BlurOperator(3, 1.0), 1.0, SolverConfig(q=2, mu=1.0))
    assert info.value.iteration == 1


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(q=3, mu=1.0),
        dict(q=1),
        dict(q=2),
        dict(q=2, mu=-1.0),
        dict(q=2, mu=1.0, beta_t=0.0),
        dict(q=2, mu=1.0, tol=0.0),
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        SolverConfig(**kwargs)


def test_solve_rejects_bad_exponents():
    with pytest.raises(ValueError):
        solve(np.zeros((4, 4)), None, 2.5, SolverConfig(q=2, mu=1.0))


def test_tv_l2_matches_convex_reference_on_a_1d_step():
    # 1 x 16 signal: a noisy step; p = 1 makes the problem convex
    rng = np.random.default_rng(9)
    g = np.where(np.arange(16) < 8, 0.2, 0.8)[None, :] + 0.05 * rng.standard_normal((1, 16))
    mu = 20.0
    blur = BlurOperator(1, 1.0)
    rep = solve(g, blur, 1.0, SolverConfig(q=2, mu=mu, tol=1e-10, max_iter=20000))
    dh, _ = dense_difference_matrices(1, 16)
    x = cp.Variable(16)
    ref = cp.Problem(cp.Minimize(cp.norm1(dh @ x) + mu / 2 * cp.sum_squares(x - g.ravel())))
    ref.solve(solver=cp.CLARABEL)
    ours = objective(rep.u_star, g, blur, 1.0, mu, 2)
    assert abs(ours - ref.value) <= 1e-4 * abs(ref.value)

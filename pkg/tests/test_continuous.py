import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from realism.continuous import (
    FlowState,
    GaussianMixtureDensity,
    deterministic_flow_step,
    langevin_chain,
    langevin_step,
    log_density,
    posterior_weighted_grad,
    realism_descent,
    typicality_gradient,
)

STD = GaussianMixtureDensity.gaussian([0.0], 1.0)


def random_mixture(rng, k, d, mass=1.0):
    w = rng.dirichlet(np.ones(k)) * mass
    return GaussianMixtureDensity.from_components(w, rng.normal(0, 2, (k, d)), rng.uniform(0.3, 3.0, (k, d)))


def central_diff(q, x, h=1e-5):
    g = np.empty_like(x)
    for j in range(len(x)):
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (q.log_density(x + e) - q.log_density(x - e)) / (2 * h)
    return g


def test_standard_normal_at_zero():
    assert log_density(STD, [0.0]) == pytest.approx(-0.5 * math.log(2 * math.pi), abs=1e-15)


def test_symmetric_pair_at_zero():
    q = GaussianMixtureDensity.from_components([0.5, 0.5], [[-1.0], [1.0]], [[1.0], [1.0]])
    phi1 = math.exp(-0.5) / math.sqrt(2 * math.pi)
    assert log_density(q, [0.0]) == pytest.approx(math.log(phi1), abs=1e-14)
    assert posterior_weighted_grad(q, [0.0])[0] == pytest.approx(0.0, abs=1e-15)


def test_density_integrates_to_total_weight():
    q = GaussianMixtureDensity.from_components([0.3, 0.45], [[-2.0], [1.5]], [[0.5], [2.0]])
    xs = np.linspace(-10, 10, 200_001)
    vals = np.exp(q.log_density(xs[:, None]))
    assert np.trapezoid(vals, xs) == pytest.approx(0.75, abs=1e-6)


def test_single_component_score():
    q = GaussianMixtureDensity.gaussian([1.0, -2.0], [0.5, 4.0])
    x = np.array([0.3, 0.7])
    np.testing.assert_allclose(posterior_weighted_grad(q, x), -(x - [1.0, -2.0]) / [0.5, 4.0], atol=1e-15)


def test_gradient_identity_random_mixtures():
    rng = np.random.default_rng(0)
    q = random_mixture(rng, 3, 5)
    for _ in range(100):
        x = rng.normal(0, 2, 5)
        g = posterior_weighted_grad(q, x)
        fd = central_diff(q, x)
        assert np.linalg.norm(g - fd) <= 1e-5 * max(np.linalg.norm(g), 1e-3)


def test_gradient_batch_matches_pointwise():
    rng = np.random.default_rng(1)
    q = random_mixture(rng, 4, 3, mass=0.6)
    xs = rng.normal(size=(20, 3))
    g = q.grad_log_density(xs)
    for i in range(20):
        np.testing.assert_allclose(g[i], q.grad_log_density(xs[i]), atol=1e-14)


def test_zero_density_is_an_error():
    with pytest.raises(ValueError):
        STD.component_posterior([1e200])


def test_invalid_parameters():
    with pytest.raises(ValueError):
        GaussianMixtureDensity.from_components([0.7, 0.7], [[0.0], [1.0]], [[1.0], [1.0]])
    with pytest.raises(ValueError):
        GaussianMixtureDensity.gaussian([0.0], -1.0)
    with pytest.raises(ValueError):
        STD.log_density([0.0, 1.0])
    with pytest.raises(ValueError):
        FlowState([math.nan], 0.1)


def test_langevin_at_mode_is_pure_noise():
    eps = 0.04
    state = FlowState(np.zeros(3), eps)
    new, accepted = langevin_step(GaussianMixtureDensity.gaussian(np.zeros(3), 1.0), state, seed=5)
    noise = np.random.default_rng(5).standard_normal(3)
    np.testing.assert_allclose(new.position, math.sqrt(2 * eps) * noise, atol=1e-15)
    assert accepted and new.t == 1


def test_langevin_step_deterministic():
    s = FlowState(np.array([0.4]), 0.05)
    a, _ = langevin_step(STD, s, seed=3, metropolis=True)
    b, _ = langevin_step(STD, s, seed=3, metropolis=True)
    assert np.array_equal(a.position, b.position)


def test_mala_kernel_matches_single_steps():
    q = GaussianMixtureDensity.from_components([0.4, 0.6], [[-1.0, 0.0], [1.5, 1.0]], [[0.5, 1.0], [1.0, 2.0]])
    eps, n = 0.1, 200
    states, rate = langevin_chain(q, [0.2, -0.1], eps, n, seed=8)
    rng = np.random.default_rng(8)
    noise = rng.standard_normal((n, 2)) * math.sqrt(2 * eps)
    log_u = np.log(rng.random(n))
    x = np.array([0.2, -0.1])
    acc = 0
    for i in range(n):
        g = q.grad_log_density(x)
        y = x + eps * g + noise[i]
        gy = q.grad_log_density(y)
        fwd = np.sum((y - x - eps * g) ** 2)
        bwd = np.sum((x - y - eps * gy) ** 2)
        if log_u[i] < q.log_density(y) - q.log_density(x) + (fwd - bwd) / (4 * eps):
            x, acc = y, acc + 1
        np.testing.assert_allclose(states[i], x, atol=1e-12)
    assert rate == acc / n


def test_mala_long_run_moments():
    states, rate = langevin_chain(STD, [0.0], 0.05, 10**6, seed=2)
    assert abs(states.mean()) < 0.01
    assert 0.97 <= states.var() <= 1.03
    assert 0.5 < rate < 1.0


def test_flow_fixed_point():
    q = GaussianMixtureDensity.gaussian([0.5, -0.5], [1.0, 2.0])
    x = np.random.default_rng(0).normal(size=(50, 2))
    new = deterministic_flow_step(q, q, FlowState(x, 0.1))
    np.testing.assert_array_equal(new.position, x)


def test_flow_single_step_is_affine():
    sp2, mu, s2, eps = 2.0, 1.5, 0.5, 0.01
    p = GaussianMixtureDensity.gaussian([0.0], sp2)
    q = GaussianMixtureDensity.gaussian([mu], s2)
    x = np.linspace(-3, 3, 13)[:, None]
    new = deterministic_flow_step(p, q, FlowState(x, eps)).position
    a = 1 - eps / sp2 + eps / s2
    b = -eps * mu / s2
    np.testing.assert_allclose(new, a * x + b, atol=1e-14)


def test_flow_mean_contracts():
    sp2, eps = 1.0, 0.1
    p = GaussianMixtureDensity.gaussian([0.0], sp2)
    x = np.random.default_rng(2).normal(3.0, 0.5, (2000, 1))
    mu0 = x.mean()
    for t in range(1, 60):
        q_t = GaussianMixtureDensity.gaussian([x.mean()], x.var())
        x = deterministic_flow_step(p, q_t, FlowState(x, eps)).position
        assert x.mean() == pytest.approx(mu0 * (1 - eps / sp2) ** t, rel=1e-9)


def test_typicality_gradient_collinear():
    rng = np.random.default_rng(4)
    for _ in range(100):
        x = rng.normal(size=16) * rng.uniform(0.1, 3)
        g = typicality_gradient(x)
        cos = g @ x / (np.linalg.norm(g) * np.linalg.norm(x))
        assert abs(abs(cos) - 1) < 1e-12


def test_typicality_gradient_finite_difference():
    x = np.array([0.3, -1.2, 0.8, 2.0])
    d = len(x)
    f = lambda z: (z @ z - d / 2) ** 2
    h = 1e-6
    fd = np.array([(f(x + h * e) - f(x - h * e)) / (2 * h) for e in np.eye(d)])
    np.testing.assert_allclose(typicality_gradient(x), fd, rtol=1e-7)


def test_typicality_gradient_zero_on_shell_and_origin():
    d = 8
    x = np.ones(d) * math.sqrt(0.5)
    np.testing.assert_allclose(typicality_gradient(x), 0.0, atol=1e-14)
    assert np.all(typicality_gradient(np.zeros(d)) == 0)


def test_descent_with_identical_densities_stays_put():
    q = GaussianMixtureDensity.gaussian([0.0, 0.0], 1.0)
    traj = realism_descent(q, q, [0.4, -1.0], 1e-3, 50)
    assert np.all(traj.positions == [0.4, -1.0])
    assert traj.steps == 50 and not traj.diverged


def test_descent_pushes_away_from_narrow_alternative():
    P = STD
    S = GaussianMixtureDensity.from_components([0.5, 0.5], [[0.0], [0.0]], [[1.0], [1e-2]])
    traj = realism_descent(P, S, [0.01], 1e-3, 200)
    assert traj.positions[1, 0] > 0.01
    assert np.all(np.diff(traj.u) <= 1e-12)


def test_descent_divergence_flag():
    P = GaussianMixtureDensity.gaussian([0.0], 1.0)
    S = GaussianMixtureDensity.gaussian([0.0], 100.0)
    traj = realism_descent(P, S, [1.0], 10.0, 1000)
    assert traj.diverged
    assert len(traj.positions) < 1001


@settings(max_examples=60, deadline=None)
@given(
    st.integers(1, 4),
    st.integers(1, 4),
    st.integers(0, 10_000),
)
def test_gradient_identity_property(k, d, seed):
    rng = np.random.default_rng(seed)
    q = random_mixture(rng, k, d)
    x = rng.normal(0, 1.5, d)
    g = q.grad_log_density(x)
    fd = central_diff(q, x)
    assert np.linalg.norm(g - fd) <= 1e-5 * max(np.linalg.norm(g), 1e-3)

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from dynroute.channel import (RateEngine, capacity, exp_e1, mean_rate_opportunistic,
                              mean_rate_opportunistic_grad, mean_rate_single, sample_snr,
                              win_probability)
from dynroute.errors import DomainError

W = 1e6


def quad_single(gbar, W=W):
    f = lambda g: math.exp(-g / gbar) / gbar * math.log2(1 + g)
    v, _ = integrate.quad(f, 0, np.inf, epsabs=0, epsrel=1e-12, limit=500)
    return W * v


def quad_opp(j, betas, gbars, W=W, fn=lambda g: math.log2(1 + g)):
    """Rate on link j: integrate over gamma_j the win probability times capacity."""
    gj, bj = gbars[j], betas[j]

    def f(g):
        p = math.exp(-g / gj) / gj
        for z in range(len(betas)):
            if z != j:
                # link z loses when beta_z gamma_z / gbar_z < beta_j g / gbar_j
                p *= -math.expm1(-bj * g / (betas[z] * gj))
        return p * fn(g)

    v, _ = integrate.quad(f, 0, np.inf, epsabs=0, epsrel=1e-12, limit=500)
    return W * v


@pytest.mark.parametrize("b", [1e-8, 1e-3, 0.3, 0.999, 1.0, 1.001, 2.5, 17.0, 400.0, 1e6])
def test_exp_e1_against_scipy(b):
    ref = math.exp(b) * special.exp1(b) if b < 700 else 1 / b * (1 - 1 / b + 2 / b**2)
    assert exp_e1(b) == pytest.approx(ref, rel=1e-12)


def test_exp_e1_domain():
    with pytest.raises(DomainError):
        exp_e1(0.0)


@pytest.mark.parametrize("gbar", [0.1, 1.0, 8.0, 37.0, 1000.0])
def test_mean_rate_single_quadrature(gbar):
    assert mean_rate_single(gbar, W) == pytest.approx(quad_single(gbar), rel=1e-8)


def test_mean_rate_single_known_value():
    # exp(1) E1(1) / ln 2
    assert mean_rate_single(1.0, 1.0) == pytest.approx(0.596347362323194 / math.log(2), rel=1e-12)


def test_mean_rate_single_rejects_bad_snr():
    with pytest.raises(DomainError):
        mean_rate_single(0.0, W)


def test_capacity_scalar_and_array():
    assert capacity(1.0, 2.0) == pytest.approx(2.0)
    np.testing.assert_allclose(capacity(np.array([0.0, 3.0]), 1.0), [0.0, 2.0])


def test_sample_snr_mean(rng):
    x = sample_snr(4.0, rng, 200_000)
    assert x.mean() == pytest.approx(4.0, rel=0.02)


def test_single_link_opportunistic_is_single():
    assert mean_rate_opportunistic(0, [1.0], [3.0], W) == pytest.approx(mean_rate_single(3.0, W))


def test_two_symmetric_links_closed_form():
    # each link carries the max of two iid exponentials half the time
    g = 1.0
    per_link = mean_rate_opportunistic(0, [1, 1], [g, g], 1.0)
    total = (2 * math.exp(1) * special.exp1(1) - math.exp(2) * special.exp1(2)) / math.log(2)
    assert 2 * per_link == pytest.approx(total, rel=1e-12)


configs = st.integers(2, 4).flatmap(lambda n: st.tuples(
    st.lists(st.floats(0.2, 5.0), min_size=n, max_size=n),
    st.lists(st.floats(0.3, 50.0), min_size=n, max_size=n)))


@settings(max_examples=25, deadline=None)
@given(configs)
def test_opportunistic_matches_quadrature(cfg):
    betas, gbars = cfg
    for j in range(len(betas)):
        assert mean_rate_opportunistic(j, betas, gbars, W) == pytest.approx(
            quad_opp(j, betas, gbars), rel=1e-6, abs=1e-9 * W)


@settings(max_examples=40, deadline=None)
@given(configs)
def test_win_probabilities_sum_to_one(cfg):
    betas, gbars = cfg
    total = sum(win_probability(j, betas, gbars) for j in range(len(betas)))
    assert total == pytest.approx(1.0, abs=1e-10)


@settings(max_examples=25, deadline=None)
@given(configs)
def test_win_probability_matches_quadrature(cfg):
    betas, gbars = cfg
    for j in range(len(betas)):
        ref = quad_opp(j, betas, gbars, W=1.0, fn=lambda g: 1.0)
        assert win_probability(j, betas, gbars) == pytest.approx(ref, abs=1e-9)


@pytest.mark.parametrize("M", [2, 3, 4, 6])
def test_symmetric_win_probability(M):
    assert win_probability(0, [1.0] * M, [2.0] * M) == pytest.approx(1.0 / M, abs=1e-10)


def test_weighted_win_probability():
    assert win_probability(0, [2.0, 1.0], [5.0, 5.0]) == pytest.approx(2.0 / 3.0, abs=1e-10)


@settings(max_examples=25, deadline=None)
@given(configs)
def test_opportunistic_gradient_finite_difference(cfg):
    betas, gbars = cfg
    for j in range(len(betas)):
        _, g = mean_rate_opportunistic_grad(j, betas, gbars, W)
        for z in range(len(betas)):
            h = 1e-6 * betas[z]
            up = list(betas); up[z] += h
            dn = list(betas); dn[z] -= h
            fd = (mean_rate_opportunistic(j, up, gbars, W) - mean_rate_opportunistic(j, dn, gbars, W)) / (2 * h)
            assert g[z] == pytest.approx(fd, rel=1e-4, abs=1e-6 * W)


@settings(max_examples=30, deadline=None)
@given(configs, st.floats(0.1, 10.0))
def test_rates_invariant_to_common_beta_scale(cfg, c):
    betas, gbars = cfg
    scaled = [c * b for b in betas]
    for j in range(len(betas)):
        assert mean_rate_opportunistic(j, scaled, gbars, W) == pytest.approx(
            mean_rate_opportunistic(j, betas, gbars, W), rel=1e-10)


@settings(max_examples=30, deadline=None)
@given(configs)
def test_opportunistic_total_bounded_by_single_rates(cfg):
    # one link per slot: the carried total never exceeds the sum of dedicated links
    betas, gbars = cfg
    total = sum(mean_rate_opportunistic(j, betas, gbars, W) for j in range(len(betas)))
    assert total <= sum(mean_rate_single(g, W) for g in gbars) + 1e-6


def test_opportunistic_monte_carlo(rng):
    for _ in range(4):
        n = int(rng.integers(2, 5))
        betas = rng.uniform(0.3, 3.0, n)
        gbars = rng.uniform(0.5, 30.0, n)
        x = rng.standard_exponential((1_000_000, n))
        win = np.argmax(betas * x, axis=1)
        cap = W * np.log2(1 + x * gbars)
        for j in range(n):
            mc = np.where(win == j, cap[:, j], 0.0).mean()
            an = mean_rate_opportunistic(j, betas, gbars, W)
            if an > 0.02 * W:
                assert mc == pytest.approx(an, rel=0.01)


def test_rate_engine_all_matches_scalar():
    eng = RateEngine(W)
    betas, gbars = [1.0, 0.5, 2.0], [3.0, 8.0, 1.0]
    rates, jac = eng.opportunistic_all(betas, gbars)
    for j in range(3):
        r, g = eng.opportunistic_grad(j, betas, gbars)
        assert rates[j] == pytest.approx(r)
        np.testing.assert_allclose(jac[j], g)


@pytest.mark.parametrize("args", [(3, [1, 1], [1, 1]), (0, [1, 0], [1, 1]),
                                  (0, [1, 1], [1, -1]), (0, [1], [1, 1])])
def test_domain_errors(args):
    with pytest.raises(DomainError):
        win_probability(*args)

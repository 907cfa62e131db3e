"""Rayleigh-fading link rates.

Expected rates are evaluated in closed form: the product of competing-link
loss probabilities is expanded by inclusion-exclusion, and every term reduces
to ``int exp(-b g) ln(1+g) dg = exp(b) E1(b) / b``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._backend import kernels
from .errors import DomainError

LN2 = math.log(2.0)


def sample_snr(gamma_bar: float, rng: np.random.Generator, size=None):
    if not gamma_bar > 0:
        raise DomainError(f"mean SNR must be positive, got {gamma_bar}")
    return rng.exponential(gamma_bar, size)


def capacity(gamma, W: float):
    """Shannon rate W log2(1 + gamma) in bit/s."""
    return W * np.log2(1.0 + np.asarray(gamma, dtype=float)) if np.ndim(gamma) \
        else W * math.log2(1.0 + gamma)


def exp_e1(b: float) -> float:
    """exp(b) * E1(b), accurate to ~1e-13 relative for b > 0."""
    if not b > 0:
        raise DomainError(f"argument must be positive, got {b}")
    return kernels.exp_e1(float(b))


def mean_rate_single(gamma_bar: float, W: float) -> float:
    """Ergodic capacity of a Rayleigh link with mean SNR ``gamma_bar``."""
    if not gamma_bar > 0:
        raise DomainError(f"mean SNR must be positive, got {gamma_bar}")
    b = 1.0 / gamma_bar
    return W / LN2 * kernels.exp_e1(b)


def _check(j, betas, gamma_bars):
    if len(betas) != len(gamma_bars):
        raise DomainError("betas and gamma_bars must cover the same links")
    if not 0 <= j < len(betas):
        raise DomainError(f"link index {j} outside U_i of size {len(betas)}")
    for b in betas:
        if not b > 0:
            raise DomainError(f"priority weights must be positive, got {b}")
    for g in gamma_bars:
        if not g > 0:
            raise DomainError(f"mean SNRs must be positive, got {g}")


def _coeffs(j, betas, gamma_bars):
    bj, gj = float(betas[j]), float(gamma_bars[j])
    others = [z for z in range(len(betas)) if z != j]
    a = np.array([bj / (float(betas[z]) * gj) for z in others])
    return others, a, 1.0 / gj


def mean_rate_opportunistic(j: int, betas: Sequence[float], gamma_bars: Sequence[float],
                            W: float) -> float:
    """Expected rate carried on link ``j`` when each slot goes to the link
    with the largest ``beta * gamma / gamma_bar`` (no time-share prefactor)."""
    _check(j, betas, gamma_bars)
    _, a, c = _coeffs(j, betas, gamma_bars)
    rate, _, _, _ = kernels.opp_integrals(c, a)
    return W / LN2 * max(rate, 0.0)


def mean_rate_opportunistic_grad(j: int, betas: Sequence[float], gamma_bars: Sequence[float],
                                 W: float) -> tuple[float, np.ndarray]:
    """Rate on link ``j`` and its gradient with respect to every beta of the node."""
    _check(j, betas, gamma_bars)
    others, a, c = _coeffs(j, betas, gamma_bars)
    rate, _, drate, _ = kernels.opp_integrals(c, a)
    scale = W / LN2
    grad = np.zeros(len(betas))
    bj = float(betas[j])
    for idx, z in enumerate(others):
        grad[j] += drate[idx] * a[idx] / bj
        grad[z] -= drate[idx] * a[idx] / float(betas[z])
    return scale * max(rate, 0.0), scale * grad


def win_probability(j: int, betas: Sequence[float], gamma_bars: Sequence[float]) -> float:
    """Probability that link ``j`` wins the weighted-SNR contest in a slot."""
    _check(j, betas, gamma_bars)
    _, a, c = _coeffs(j, betas, gamma_bars)
    _, win, _, _ = kernels.opp_integrals(c, a)
    return min(max(win, 0.0), 1.0)


@dataclass(frozen=True)
class RateEngine:
    """Bandwidth-bound front end over the closed-form rate integrals."""

    W: float

    def single(self, gamma_bar: float) -> float:
        return mean_rate_single(gamma_bar, self.W)

    def opportunistic(self, j: int, betas, gamma_bars) -> float:
        return mean_rate_opportunistic(j, betas, gamma_bars, self.W)

    def opportunistic_grad(self, j: int, betas, gamma_bars):
        return mean_rate_opportunistic_grad(j, betas, gamma_bars, self.W)

    def opportunistic_all(self, betas, gamma_bars):
        """Rates of every link of a node and the Jacobian d rate_j / d beta_z."""
        n = len(betas)
        rates = np.zeros(n)
        jac = np.zeros((n, n))
        for j in range(n):
            rates[j], jac[j] = self.opportunistic_grad(j, betas, gamma_bars)
        return rates, jac

"""M/M/1 delay-violation model and the admissible-rate rules built on it.

Rates are bit/s and deadlines seconds; the queueing formulas are applied to
bit rates directly, as if packets were one bit long.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import ConfigurationError, InstabilityError, StarvationError


@dataclass(frozen=True)
class QosSpec:
    """Per-node deadline and violation threshold, keyed by (node, source).

    ``default_deadline`` / ``default_loss`` apply to pairs not listed.
    """

    default_deadline: float = 1e-4
    default_loss: float = 1e-6
    per_node_deadline: Mapping = field(default_factory=dict)
    per_node_loss: Mapping = field(default_factory=dict)
    end_to_end_deadline: float | None = None
    end_to_end_loss: float | None = None

    def __post_init__(self):
        for d in [self.default_deadline, *self.per_node_deadline.values()]:
            if not d > 0:
                raise ConfigurationError(f"deadlines must be positive, got {d}")
        for e in [self.default_loss, *self.per_node_loss.values()]:
            if not 0 < e < 1:
                raise ConfigurationError(f"loss thresholds must lie in (0, 1), got {e}")

    def deadline(self, node, k: int) -> float:
        return self.per_node_deadline.get((node, k), self.default_deadline)

    def loss(self, node, k: int) -> float:
        return self.per_node_loss.get((node, k), self.default_loss)

    def penalty(self, node, k: int) -> float:
        """ln(1/eps*) / D*, the rate margin the node must keep for source k."""
        return math.log(1.0 / self.loss(node, k)) / self.deadline(node, k)

    def check_end_to_end(self, path_nodes: Sequence, k: int) -> bool:
        """Whether the per-node budgets along a path respect the end-to-end ones."""
        ok = True
        if self.end_to_end_deadline is not None:
            total = sum(self.deadline(n, k) for n in path_nodes)
            ok &= total <= self.end_to_end_deadline * (1 + 1e-12)
        if self.end_to_end_loss is not None:
            keep = 1.0
            for n in path_nodes:
                keep *= 1.0 - self.loss(n, k)
            ok &= 1.0 - keep <= self.end_to_end_loss * (1 + 1e-9)
        return bool(ok)


def split_rate(rho_ik: float, mu_ijk: float, mu_ik: float) -> float:
    if mu_ik <= 0:
        if rho_ik > 0:
            raise StarvationError(f"arrival rate {rho_ik} at a node with zero service rate")
        return 0.0
    return mu_ijk / mu_ik * rho_ik


def delay_violation_prob(rho: float, mu: float, deadline: float) -> float:
    """P(wait > deadline) for a stable M/M/1 queue."""
    if rho < 0:
        raise ConfigurationError(f"arrival rate must be >= 0, got {rho}")
    if rho >= mu:
        raise InstabilityError(f"queue unstable: rho={rho} >= mu={mu}")
    return rho / mu * math.exp(-deadline * (mu - rho))


def max_admissible_rate(mu: float, eps_star: float, deadline: float) -> float:
    return max(0.0, mu - math.log(1.0 / eps_star) / deadline)


def exact_admissible_rate(mu: float, eps_star: float, deadline: float) -> float:
    """Largest rho with delay_violation_prob(rho, mu, deadline) <= eps_star.

    Solved by bisection on the exact tail; the violation probability is
    increasing in rho on [0, mu).
    """
    if mu <= 0:
        return 0.0
    lo, hi = 0.0, mu
    if delay_violation_prob(0.0, mu, deadline) > eps_star:
        return 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if delay_violation_prob(mid, mu, deadline) <= eps_star:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * mu:
            break
    return lo


def rho_star_last_hop(mu_hat_ikk: float, eps_star: float, deadline: float) -> float:
    return max_admissible_rate(mu_hat_ikk, eps_star, deadline)


def rho_star_interior(per_link: Iterable[tuple[float, float]], eps_star: float,
                      deadline: float) -> float:
    """Admissible rate at a node whose outgoing service is capped by the
    next hops' limits: ``per_link`` holds (mu_hat, rho_hat) pairs."""
    mu = sum(min(m, r) for m, r in per_link)
    return max_admissible_rate(mu, eps_star, deadline)


def apportion_limits(rho_star_ik: float, observed: Mapping, prev_hops: Sequence,
                     is_source: Mapping | None = None, M: int = 1) -> dict:
    """Split a node's admissible rate among its predecessors.

    ``observed`` maps predecessor -> measured arrival rate; ``is_source``
    maps predecessor -> bool (defaults to ``pred.is_source``).
    """
    return {y: rho_star_ik * s for y, s in
            apportion_shares(observed, prev_hops, is_source, M).items()}


def apportion_shares(observed: Mapping, prev_hops: Sequence,
                     is_source: Mapping | None = None, M: int = 1) -> dict:
    """Fractions of rho* granted to each predecessor (see ``apportion_limits``)."""
    total = sum(observed.get(y, 0.0) for y in prev_hops)
    out = {}
    for y in prev_hops:
        if total > 0:
            out[y] = observed.get(y, 0.0) / total
        else:
            src = is_source[y] if is_source is not None else getattr(y, "is_source", False)
            out[y] = 1.0 if src else 1.0 / M
    return out


def derive_equal_budgets(path_length: int, end_to_end_deadline: float,
                         end_to_end_loss: float) -> tuple[float, float]:
    if path_length < 1:
        raise ConfigurationError("path length must be >= 1")
    d = end_to_end_deadline / path_length
    e = -math.expm1(math.log1p(-end_to_end_loss) / path_length)
    return d, e

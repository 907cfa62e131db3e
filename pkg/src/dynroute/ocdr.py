"""Opportunistic scheme: per-slot link choice by weighted instantaneous SNR.

Node ``i`` sends on the link maximising ``beta_ij * gamma_ij(t) / gbar_ij``
and, on that link, serves source ``k`` with probability proportional to
``alpha_ijk``. Both weight families are tuned by local gradient ascent.
"""
from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from .channel import RateEngine
from .control import (ControlReport, Hyperparams, run_control_loop, static_warm_edges,
                      step_group)
from .errors import StructuralError
from .network import Network, NodeAgent, RoundResult
from .qos import QosSpec
from .topology import ChannelParams, Topology


class OcdrScheme:
    name = "ocdr"

    def init_params(self, agent: NodeAgent) -> None:
        agent.beta = np.ones(len(agent.links))
        agent.alpha = np.ones(len(agent.pairs))

    def local_rates(self, agent: NodeAgent, engine: RateEngine):
        return mu_hat_all(agent, engine)


def source_probs(agent: NodeAgent) -> np.ndarray:
    """pi_ijk for every (link, source) pair, normalised per link."""
    pi = np.zeros(len(agent.pairs))
    for idx in agent.link_pairs:
        tot = agent.alpha[idx].sum()
        if tot > 0:
            pi[idx] = agent.alpha[idx] / tot
    return pi


def mu_hat_all(agent: NodeAgent, engine: RateEngine):
    """Expected service rate per (link, source) pair and its Jacobian over [beta, alpha]."""
    nl, npairs = len(agent.links), len(agent.pairs)
    key = agent.beta.tobytes()
    cached = getattr(agent, "_opp_cache", None)
    if cached is not None and cached[0] == key:
        rates, drates = cached[1]
    else:
        rates, drates = engine.opportunistic_all(agent.beta, agent.gbar)
        agent._opp_cache = (key, (rates, drates))
    pi = source_probs(agent)
    mu = np.zeros(npairs)
    jac = np.zeros((npairs, nl + npairs))
    for l, idx in enumerate(agent.link_pairs):
        tot = agent.alpha[idx].sum()
        for p in idx:
            mu[p] = pi[p] * rates[l]
            jac[p, :nl] = pi[p] * drates[l]
            if tot > 0:
                for q in idx:
                    jac[p, nl + q] = rates[l] * ((p == q) - pi[p]) / tot
    return mu, jac


def select_link(phi_inputs: Sequence[float], betas: Sequence[float],
                rng: np.random.Generator | None = None) -> int:
    """Index of the link with the largest ``beta * gamma / gbar``.

    ``phi_inputs`` holds the normalised draws ``gamma / gbar``; exact ties are
    broken uniformly at random.
    """
    if len(phi_inputs) == 0:
        raise StructuralError("node has no next hop")
    phi = np.asarray(betas, dtype=float) * np.asarray(phi_inputs, dtype=float)
    best = np.flatnonzero(phi == phi.max())
    if len(best) == 1 or rng is None:
        return int(best[0])
    return int(rng.choice(best))


def pick_source(alphas: Mapping[int, float], rng: np.random.Generator) -> int | None:
    """Draw a source with probability alpha_k / sum(alpha); None when all are zero."""
    keys = sorted(alphas)
    w = np.array([alphas[k] for k in keys], dtype=float)
    tot = w.sum()
    if tot <= 0:
        return None
    return keys[int(np.searchsorted(np.cumsum(w) / tot, rng.random(), side="right"))]


def grad_step(agent: NodeAgent, grad: np.ndarray, thetas: dict, do_beta: bool,
              hyper: Hyperparams) -> None:
    """Local ascent step: alpha every T1 round, beta every T2 round."""
    nl = len(agent.links)
    scale = max(float(agent.mu_hat.sum()), 1e-300) if agent.mu_hat is not None else 1.0
    g_beta, g_alpha = grad[:nl], grad[nl:]
    grad_step_alpha(agent, g_alpha, thetas["alpha"], scale, hyper.alpha_min)
    if do_beta:
        grad_step_beta(agent, g_beta, thetas["beta"], scale, hyper.beta_min)


def grad_step_alpha(agent: NodeAgent, g_alpha: np.ndarray, theta: float, scale: float,
                    floor: float = 0.0) -> None:
    for idx in agent.link_pairs:
        if len(idx) > 1 and np.any(g_alpha[idx] != 0):
            agent.alpha[idx] = step_group(agent.alpha[idx], g_alpha[idx], theta, scale, floor)


def grad_step_beta(agent: NodeAgent, g_beta: np.ndarray, theta: float, scale: float,
                   floor: float = 1e-6) -> None:
    if len(agent.beta) > 1 and np.any(g_beta != 0):
        agent.beta = step_group(agent.beta, g_beta, theta, scale, floor)
        agent.beta = np.maximum(agent.beta, floor)


def build(topology: Topology, channel: ChannelParams, qos: QosSpec,
          weights: Mapping[int, float], allowed: set | None = None) -> Network:
    return Network(topology, channel, qos, weights, OcdrScheme(), allowed=allowed)


def evaluate_objective(net: Network) -> RoundResult:
    """F and rho* for the network's current parameters and arrival shares."""
    return net.evaluate()


def run_control_loop_ocdr(topology: Topology, channel: ChannelParams, qos: QosSpec,
                          weights: Mapping[int, float], hyper: Hyperparams | None = None,
                          allowed: set | None = None,
                        warm_start: bool | set = True) -> tuple[ControlReport, Network]:
    net = build(topology, channel, qos, weights, allowed)
    edges = static_warm_edges(topology, channel, qos, weights, warm_start, allowed)
    report = run_control_loop(net, hyper or Hyperparams(), grad_step, edges)
    return report, net

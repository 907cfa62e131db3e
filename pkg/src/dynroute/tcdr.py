"""Time-division scheme: (link, source) pairs are time-shared from average
link qualities only; no instantaneous CSI enters the control path."""
from __future__ import annotations

from typing import Mapping

import numpy as np

from .channel import RateEngine
from .control import (ControlReport, Hyperparams, run_control_loop, static_warm_edges,
                      step_group)
from .network import Network, NodeAgent
from .qos import QosSpec
from .topology import ChannelParams, Topology


class TcdrScheme:
    name = "tcdr"

    def init_params(self, agent: NodeAgent) -> None:
        agent.beta = None
        agent.alpha = np.ones(len(agent.pairs))

    def local_rates(self, agent: NodeAgent, engine: RateEngine):
        return mu_hat_all_td(agent, engine)


def pair_probs(agent: NodeAgent) -> np.ndarray:
    """pi'_ijk, normalised jointly over all (link, source) pairs of the node."""
    tot = agent.alpha.sum()
    return agent.alpha / tot if tot > 0 else np.zeros_like(agent.alpha)


def mu_hat_all_td(agent: NodeAgent, engine: RateEngine):
    npairs = len(agent.pairs)
    caps = np.array([engine.single(g) for g in agent.gbar])
    pi = pair_probs(agent)
    tot = agent.alpha.sum()
    mu = np.zeros(npairs)
    jac = np.zeros((npairs, npairs))
    for p, (l, _) in enumerate(agent.pairs):
        mu[p] = pi[p] * caps[l]
        if tot > 0:
            jac[p] = -caps[l] * pi[p] / tot
            jac[p, p] += caps[l] / tot
    return mu, jac


def pick_link_and_source(agent: NodeAgent, rng: np.random.Generator):
    """Draw a (next hop, source) pair with probability pi'; None when idle."""
    pi = pair_probs(agent)
    if pi.sum() <= 0:
        return None
    p = int(np.searchsorted(np.cumsum(pi), rng.random() * pi.sum(), side="right"))
    p = min(p, len(pi) - 1)
    l, k = agent.pairs[p]
    return agent.links[l], k


def grad_step(agent: NodeAgent, grad: np.ndarray, thetas: dict, do_beta: bool,
              hyper: Hyperparams) -> None:
    scale = max(float(agent.mu_hat.sum()), 1e-300) if agent.mu_hat is not None else 1.0
    grad_step_alpha_prime(agent, grad, thetas["alpha_prime"], scale, hyper.alpha_min)


def grad_step_alpha_prime(agent: NodeAgent, grad: np.ndarray, theta: float, scale: float,
                          floor: float = 0.0) -> None:
    if len(agent.alpha) > 1 and np.any(grad != 0):
        agent.alpha = step_group(agent.alpha, grad, theta, scale, floor)


def build(topology: Topology, channel: ChannelParams, qos: QosSpec,
          weights: Mapping[int, float], allowed: set | None = None) -> Network:
    return Network(topology, channel, qos, weights, TcdrScheme(), allowed=allowed)


def run_control_loop_td(topology: Topology, channel: ChannelParams, qos: QosSpec,
                        weights: Mapping[int, float], hyper: Hyperparams | None = None,
                        allowed: set | None = None,
                        warm_start: bool | set = True) -> tuple[ControlReport, Network]:
    net = build(topology, channel, qos, weights, allowed)
    edges = static_warm_edges(topology, channel, qos, weights, warm_start, allowed)
    report = run_control_loop(net, hyper or Hyperparams(), grad_step, edges)
    return report, net

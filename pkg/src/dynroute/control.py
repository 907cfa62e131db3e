"""Gradient-ascent control loop shared by both schemes (analytic mode).

In analytic mode expectations replace slot realisations: one control round
(one T1 period) evaluates the network, steps every node's parameters along
its local gradient and then lets arrival estimates follow the new flows.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import EnumerationCapError
from .network import Network, relative_change

log = logging.getLogger(__name__)


@dataclass
class Hyperparams:
    theta_alpha: float = 0.2
    theta_beta: float = 0.2
    theta_alpha_prime: float = 0.2
    alpha_min: float = 0.0
    beta_min: float = 1e-6
    beta_every: int = 5          # T2 / T1, in control rounds
    tol: float = 1e-5
    patience: int = 20
    max_rounds: int = 10_000
    grow: float = 1.2            # step growth after an accepted step
    max_halvings: int = 40
    T1: float = 1e-2             # seconds; used by the simulator
    T2: float = 1.0
    smoothing: tuple = (1.0, 0.3, 0.1, 0.03, 0.01, 0.0)   # soft-cap widths, in penalties
    jitter: float = 1e-3
    seed: int = 0
    restarts: int = 0            # extra ascents from random initial weights

    def __post_init__(self):
        if self.beta_every < 1:
            raise ValueError("beta_every must be >= 1")
        if self.beta_min <= 0:
            raise ValueError("beta_min must be positive")


@dataclass
class ControlReport:
    F: float
    rho: dict
    rho_star: dict
    rounds: int
    converged: bool
    trace: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)


def _scale(v: np.ndarray) -> float:
    m = float(np.max(np.abs(v))) if v.size else 0.0
    return m if m > 0 else 1.0


def step_group(values: np.ndarray, grad: np.ndarray, theta: float, rate_scale: float,
               floor: float) -> np.ndarray:
    """One ascent step on a group of ratio-invariant parameters.

    The step is theta * P^2 / R * grad, with P the group's largest value and R
    the node's local rate scale, so theta is dimensionless.
    """
    p = _scale(values)
    new = values + theta * p * p * grad / rate_scale
    new = np.maximum(new, floor)
    if not np.any(new > 0):
        return values.copy()
    return new / new.max()


def jitter_params(net: Network, amount: float, seed: int) -> None:
    """Multiply every initial weight by 1 + U(-amount, amount).

    Breaks exact ties between mirror-image relays, which otherwise keep the
    ascent on a symmetric stationary point forever.
    """
    if amount <= 0:
        return
    rng = np.random.default_rng(seed)
    x = net.get_params()
    net.set_params(x * (1.0 + amount * rng.uniform(-1.0, 1.0, size=x.size)))


def run_control_loop(net: Network, hyper: Hyperparams, update_node,
                     warm_edges: set | None = None) -> ControlReport:
    """Drive ``net`` to the best of several local optima.

    ``update_node(agent, grad, thetas, do_beta, hyper)`` applies one local
    step in place. The first ascent starts from uniform weights (plus a tiny
    jitter); ``hyper.restarts`` further ascents start from seeded random
    weights, since cooperative reassignments (every relay specialising on one
    source at once) are not reachable by local steps from the uniform point.
    With ``warm_edges`` one more ascent starts from weights favouring those
    (i, j, k) triples, typically the best static assignment. The best state
    found is left loaded in ``net``.
    """
    start = net.get_params()
    rng = np.random.default_rng(hyper.seed)
    best = None
    rounds = 0
    n_random = max(0, hyper.restarts)
    for r in range(1 + n_random + (warm_edges is not None)):
        if r == 0:
            net.set_params(start)
            jitter_params(net, hyper.jitter, hyper.seed)
        elif r > n_random:
            net.set_params(start * net.edge_params(warm_edges))
        else:
            net.set_params(start * rng.uniform(0.05, 1.0, size=start.size))
        net.reset_flows()
        rep = _ascend(net, hyper, update_node)
        rounds += rep.rounds
        if best is None or rep.F > best[0].F * (1 + 1e-9):
            best = (rep, net.snapshot(), net.shares_snapshot())
    rep, snap, shares = best
    net.restore(snap)
    net.shares_restore(shares)
    net.evaluate()
    rep.rounds = rounds
    return rep


def _ascend(net: Network, hyper: Hyperparams, update_node) -> ControlReport:
    """One annealed ascent from the parameters currently loaded in ``net``.

    Each smoothing stage runs until the smoothed objective stops moving; the
    last stage (width 0) is the exact objective.
    """
    theta0 = {"alpha": hyper.theta_alpha, "beta": hyper.theta_beta,
              "alpha_prime": hyper.theta_alpha_prime}
    # cold start: no limits have propagated, nothing is admitted
    trace = [0.0]
    window = max(hyper.patience, 2 * hyper.beta_every)
    best = None
    converged = False
    n = 0
    stages = list(hyper.smoothing)
    if not stages or stages[-1] != 0.0:
        stages.append(0.0)
    for stage, smooth in enumerate(stages):
        thetas = dict(theta0)
        res = net.evaluate(with_grad=True, smooth=smooth)
        if best is None:
            best = (res.F, net.snapshot(), net.shares_snapshot())
        local = [res.F_smooth]
        stage_done = False
        while n < hyper.max_rounds:
            n += 1
            do_beta = n % hyper.beta_every == 0
            snap = net.snapshot()
            accepted = False
            for _ in range(hyper.max_halvings):
                for i, a in net.agents.items():
                    update_node(a, res.grads[i], thetas, do_beta, hyper)
                trial = net.evaluate(smooth=smooth)
                if trial.F_smooth >= res.F_smooth - 1e-12 * max(abs(res.F_smooth), 1.0):
                    accepted = True
                    break
                net.restore(snap)
                for key in thetas:
                    thetas[key] *= 0.5
            if accepted:
                for key in thetas:
                    thetas[key] = min(thetas[key] * hyper.grow, theta0[key])
            else:
                net.restore(snap)
            net.evaluate(update_arrivals=True)
            res = net.evaluate(with_grad=True, smooth=smooth)
            trace.append(res.F)
            local.append(res.F_smooth)
            if res.F > best[0]:
                best = (res.F, net.snapshot(), net.shares_snapshot())
            if len(local) > window + 1:
                recent = local[-(window + 1):]
                if max(relative_change(b, a) for a, b in zip(recent, recent[1:])) < hyper.tol \
                        and len(local) > 2 * hyper.beta_every:
                    stage_done = True
                    break
        if stage == len(stages) - 1:
            converged = stage_done
        if n >= hyper.max_rounds:
            break
    F, snap, shares = best
    net.restore(snap)
    net.shares_restore(shares)
    res = net.evaluate()
    if not converged:
        log.warning("control loop stopped after %d rounds without converging", n)
    return ControlReport(F=res.F, rho=res.rho, rho_star=res.rho_star, rounds=n,
                         converged=converged, trace=trace, tables=net.tables())


def static_warm_edges(topology, channel, qos, weights, warm_start, allowed=None):
    """Resolve a ``warm_start`` argument to an edge set (or None)."""
    if warm_start is False or warm_start is None:
        return None
    if warm_start is not True:
        return set(warm_start)
    if allowed is not None:
        return set(allowed)
    from .benchmark import best_static
    try:
        assignment, _ = best_static(topology, channel, qos, weights)
    except EnumerationCapError:
        log.info("too many static assignments for a warm start; skipping it")
        return None
    return assignment.edges(topology)

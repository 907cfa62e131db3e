"""Per-node agents and the message-passing round shared by OCDR and TCDR.

A round runs three one-hop message waves over the layered graph:

1. limits, destination side to source side: each node turns the limits it
   received from its next hops into its admissible rate rho* and grants every
   predecessor a share of it (rho_hat);
2. flows, source side to destination side: admitted traffic is split over
   outgoing links in proportion to the capped service rates, which is what
   each next hop measures as its arrival rates;
3. prices, source side to destination side: a node whose limit is binding
   for an upstream neighbour receives that neighbour's marginal value of
   admitted rate. The price is d F / d rho*_ik, so the local parameter
   gradient is price times d rho*_ik / d parameter.

An agent only reads its own fields and the messages delivered to it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .channel import RateEngine
from .qos import QosSpec, apportion_shares
from .topology import ChannelParams, NodeId, Topology


@dataclass
class NodeAgent:
    node: NodeId
    links: tuple[NodeId, ...]
    gbar: np.ndarray
    pairs: list[tuple[int, int]]      # (link index, source) this node may forward
    sources: tuple[int, ...]
    last_hop: bool
    penalty: dict[int, float]
    preds: dict[int, tuple[NodeId, ...]]  # per source: predecessors carrying it
    M: int
    weight: float = 0.0               # f_k, sources only

    # scheme parameters
    beta: np.ndarray | None = None
    alpha: np.ndarray | None = None

    # message inboxes
    rho_hat_in: dict = field(default_factory=dict)   # (link idx, k) -> limit from next hop
    price_in: dict = field(default_factory=dict)     # k -> list of (pred, price)
    arrivals: dict = field(default_factory=dict)     # (pred, k) -> measured rate

    # local results of the last evaluation
    mu_hat: np.ndarray | None = None
    jac: np.ndarray | None = None
    rho_star: dict = field(default_factory=dict)
    slack: dict = field(default_factory=dict)        # k -> unclamped rho*
    shares: dict = field(default_factory=dict)       # (pred, k) -> fraction of rho*
    rates_key: tuple | None = None                    # parameters mu_hat was computed at

    def __post_init__(self):
        self.pair_index = {p: n for n, p in enumerate(self.pairs)}
        self.link_pairs = [[n for n, (a, _) in enumerate(self.pairs) if a == l]
                           for l in range(len(self.links))]

    # -- limits wave -------------------------------------------------------
    def capped_service(self, n: int) -> float:
        a, k = self.pairs[n]
        if self.last_hop:
            return self.mu_hat[n]
        return min(self.mu_hat[n], self.rho_hat_in.get((a, k), 0.0))

    def compute_rho_star(self, smooth: float = 0.0) -> None:
        """Admissible rate per source.

        With ``smooth > 0`` the min() caps and the clamp at zero are replaced
        by soft versions of width ``smooth * penalty``; ``w_mu`` and ``w_clamp``
        keep their derivatives for the prices wave.
        """
        self.rho_star, self.slack, self.smoothed = {}, {}, {}
        self.w_mu = np.ones(len(self.pairs))
        self.w_clamp = {}
        for k in self.sources:
            tau = smooth * self.penalty[k]
            mu = 0.0
            for n, (a, kk) in enumerate(self.pairs):
                if kk != k:
                    continue
                if self.last_hop:
                    mu += self.mu_hat[n]
                    continue
                x, y = self.mu_hat[n], self.rho_hat_in.get((a, k), 0.0)
                if tau > 0:
                    v, w = softmin(x, y, tau)
                else:
                    v, w = (x, 1.0) if x <= y else (y, 0.0)
                mu += v
                self.w_mu[n] = w
            x = mu - self.penalty[k]
            self.slack[k] = x
            self.rho_star[k] = max(0.0, x)
            if tau > 0:
                self.smoothed[k], self.w_clamp[k] = softplus(x, tau)
            else:
                self.smoothed[k], self.w_clamp[k] = max(0.0, x), (1.0 if x > 0 else 0.0)

    def compute_shares(self) -> None:
        self.shares = {}
        for k in self.sources:
            preds = self.preds[k]
            obs = {y: self.arrivals.get((y, k), 0.0) for y in preds}
            for y, s in apportion_shares(obs, preds, M=self.M).items():
                self.shares[(y, k)] = s

    def limits_out(self, smoothed: bool = False) -> dict:
        """rho_hat messages: predecessor -> {k: limit}."""
        val = self.smoothed if smoothed else self.rho_star
        out: dict = {}
        for (y, k), s in self.shares.items():
            out.setdefault(y, {})[k] = s * val[k]
        return out

    # -- flows wave --------------------------------------------------------
    def flows_out(self, rho_in: dict) -> dict:
        """Split per-source arrivals over links; returns next hop -> {k: rate}."""
        out: dict = {}
        for k in self.sources:
            idx = [n for n, (_, kk) in enumerate(self.pairs) if kk == k]
            caps = [self.capped_service(n) for n in idx]
            total = sum(caps)
            r = rho_in.get(k, 0.0)
            for n, c in zip(idx, caps):
                j = self.links[self.pairs[n][0]]
                f = c / total * r if total > 0 else 0.0
                out.setdefault(j, {})[k] = out.get(j, {}).get(k, 0.0) + f
        return out

    # -- prices wave -------------------------------------------------------
    def price(self, k: int) -> float:
        if self.node.is_source:
            return self.weight
        return sum(p * self.shares.get((y, k), 0.0) for y, p in self.price_in.get(k, ()))

    def prices_out(self) -> tuple[dict, np.ndarray]:
        """Returns (next hop -> {k: price}, dF/dmu_hat per pair)."""
        g_mu = np.zeros(len(self.pairs))
        out: dict = {}
        for k in self.sources:
            lam = self.price(k) * self.w_clamp[k]
            if lam == 0.0:
                continue
            for n, (a, kk) in enumerate(self.pairs):
                if kk != k:
                    continue
                w = self.w_mu[n]
                g_mu[n] += lam * w
                if not self.last_hop and w < 1.0:
                    out.setdefault(self.links[a], {})[k] = lam * (1.0 - w)
        return out, g_mu


@dataclass
class RoundResult:
    F: float
    rho: dict            # k -> admitted source rate
    rho_star: dict       # (node, k) -> rho*
    grads: dict | None = None   # node -> gradient over [beta, alpha]
    F_smooth: float = 0.0


class Network:
    """A layered network of agents driven by a local rate model (the scheme).

    ``scheme`` must provide ``init_params(agent)`` and
    ``local_rates(agent, engine) -> (mu_hat, jac)`` where ``jac`` is the
    Jacobian of mu_hat over the agent's parameter vector ``[beta, alpha]``.
    ``allowed`` optionally restricts each source to a set of edges.
    """

    def __init__(self, topology: Topology, channel: ChannelParams, qos: QosSpec,
                 weights: dict[int, float], scheme, allowed: set | None = None):
        self.topology = topology
        self.channel = channel
        self.qos = qos
        self.weights = dict(weights)
        self.scheme = scheme
        self.engine = RateEngine(channel.W)
        self.allowed = allowed
        self.agents: dict[NodeId, NodeAgent] = {}
        for i in topology.transmitters:
            self.agents[i] = self._make_agent(i)
        self.order_up = sorted(self.agents, reverse=True)   # destination side first
        self.order_down = sorted(self.agents)
        for a in self.agents.values():
            scheme.init_params(a)
            a.compute_shares()

    def _make_agent(self, i: NodeId) -> NodeAgent:
        top = self.topology
        links = top.next_hops[i]
        pairs = []
        for k in top.carried_sources(i):
            for j in top.out_links(i, k):
                if self.allowed is not None and (i, j, k) not in self.allowed:
                    continue
                pairs.append((links.index(j), k))
        used = sorted({a for a, _ in pairs})
        # links never usable under the restriction are dropped from the contest
        remap = {a: n for n, a in enumerate(used)}
        links = tuple(links[a] for a in used)
        pairs = [(remap[a], k) for a, k in pairs]
        sources = tuple(sorted({k for _, k in pairs}))
        preds = {}
        for k in sources:
            ps = []
            for y in top.prev_hops[i]:
                if k not in top.carried_sources(y):
                    continue
                if self.allowed is not None and (y, i, k) not in self.allowed:
                    continue
                ps.append(y)
            preds[k] = tuple(ps)
        return NodeAgent(
            node=i,
            links=links,
            gbar=np.array([top.mean_snr(i, j, self.channel) for j in links]),
            pairs=pairs,
            sources=sources,
            last_hop=top.is_last_hop(i),
            penalty={k: self.qos.penalty(i, k) for k in sources},
            preds=preds,
            M=top.M,
            weight=self.weights.get(i.index, 0.0) if i.is_source else 0.0,
        )

    # -- one full evaluation ----------------------------------------------
    def evaluate(self, with_grad: bool = False, update_arrivals: bool = False,
                 smooth: float = 0.0) -> RoundResult:
        """One full round at the current parameters and arrival shares.

        ``F`` is always the exact objective; ``F_smooth`` (and the gradient)
        use the soft caps when ``smooth > 0``.
        """
        for i in self.order_up:
            a = self.agents[i]
            key = (None if a.beta is None else a.beta.tobytes(), a.alpha.tobytes())
            if key != a.rates_key:
                a.mu_hat, a.jac = self.scheme.local_rates(a, self.engine)
                a.rates_key = key
        grads = None
        if smooth > 0:
            self._limits(smooth)
            F_smooth = sum(w * self._source_value(k, smoothed=True)
                           for k, w in self.weights.items())
            if with_grad:
                grads = self._prices()
        self._limits(0.0)
        rho = {i.index: self._source_value(i.index) for i in self.topology.sources}
        F = sum(self.weights.get(k, 0.0) * r for k, r in rho.items())
        if smooth <= 0:
            F_smooth = F
            if with_grad:
                grads = self._prices()
        rho_star = {(i, k): v for i, a in self.agents.items() for k, v in a.rho_star.items()}
        if update_arrivals:
            self._flows(rho)
        return RoundResult(F=F, rho=rho, rho_star=rho_star, grads=grads, F_smooth=F_smooth)

    def _source_value(self, k: int, smoothed: bool = False) -> float:
        s = NodeId.source(k)
        a = self.agents.get(s)
        if a is None or k not in a.rho_star:
            return 0.0
        return a.smoothed[k] if smoothed else a.rho_star[k]

    def _limits(self, smooth: float) -> None:
        for a in self.agents.values():
            a.rho_hat_in = {}
        for i in self.order_up:
            a = self.agents[i]
            a.compute_rho_star(smooth)
            for y, lim in a.limits_out(smoothed=smooth > 0).items():
                ya = self.agents[y]
                for k, v in lim.items():
                    for n, (l, kk) in enumerate(ya.pairs):
                        if kk == k and ya.links[l] == i:
                            ya.rho_hat_in[(l, k)] = v

    def _flows(self, rho: dict) -> None:
        inflow: dict = {i: {} for i in self.agents}
        for i in self.topology.sources:
            if i in self.agents:
                inflow[i] = {i.index: rho[i.index]}
        measured: dict = {i: {} for i in self.agents}
        for i in self.order_down:
            a = self.agents[i]
            for j, per_k in a.flows_out(inflow[i]).items():
                if j not in self.agents:
                    continue
                for k, f in per_k.items():
                    inflow[j][k] = inflow[j].get(k, 0.0) + f
                    measured[j][(i, k)] = f
        for i, a in self.agents.items():
            a.arrivals = measured[i]
            a.compute_shares()

    def _prices(self) -> dict:
        for a in self.agents.values():
            a.price_in = {}
        grads = {}
        for i in self.order_down:
            a = self.agents[i]
            out, g_mu = a.prices_out()
            for j, per_k in out.items():
                if j not in self.agents:
                    continue
                for k, lam in per_k.items():
                    self.agents[j].price_in.setdefault(k, []).append((i, lam))
            grads[i] = g_mu @ a.jac if a.jac.size else np.zeros(0)
        return grads

    # -- flat parameter access (tests, finite differences) -------------------
    def param_layout(self) -> list[tuple[NodeId, str, int]]:
        out = []
        for i in self.order_down:
            a = self.agents[i]
            if a.beta is not None:
                out += [(i, "beta", n) for n in range(len(a.beta))]
            out += [(i, "alpha", n) for n in range(len(a.alpha))]
        return out

    def get_params(self) -> np.ndarray:
        vals = []
        for i, kind, n in self.param_layout():
            vals.append(getattr(self.agents[i], kind)[n])
        return np.array(vals)

    def set_params(self, x: Iterable[float]) -> None:
        for (i, kind, n), v in zip(self.param_layout(), x):
            getattr(self.agents[i], kind)[n] = v

    def edge_params(self, edges: set, low: float = 0.05) -> np.ndarray:
        """Parameter vector favouring the (i, j, k) triples in ``edges``."""
        vals = []
        for i, kind, n in self.param_layout():
            a = self.agents[i]
            if kind == "beta":
                hit = any((i, a.links[n], k) in edges for k in a.sources)
            else:
                l, k = a.pairs[n]
                hit = (i, a.links[l], k) in edges
            vals.append(1.0 if hit else low)
        return np.array(vals)

    def flat_grad(self, grads: dict) -> np.ndarray:
        return np.concatenate([grads[i] for i in self.order_down]) if grads else np.zeros(0)

    def snapshot(self) -> dict:
        return {i: (None if a.beta is None else a.beta.copy(), a.alpha.copy())
                for i, a in self.agents.items()}

    def restore(self, snap: dict) -> None:
        for i, (b, al) in snap.items():
            a = self.agents[i]
            a.beta = None if b is None else b.copy()
            a.alpha = al.copy()

    def reset_flows(self) -> None:
        """Forget measured arrivals (cold start for limit apportionment)."""
        for a in self.agents.values():
            a.arrivals = {}
            a.compute_shares()

    def shares_snapshot(self) -> dict:
        return {i: (dict(a.arrivals), dict(a.shares)) for i, a in self.agents.items()}

    def shares_restore(self, snap: dict) -> None:
        for i, (arr, sh) in snap.items():
            self.agents[i].arrivals = dict(arr)
            self.agents[i].shares = dict(sh)

    def tables(self) -> dict:
        """Per-node rate tables of the last evaluation, keyed by labels."""
        lab = self.topology.label
        out = {}
        for i, a in self.agents.items():
            rows = []
            for n, (l, k) in enumerate(a.pairs):
                rows.append({
                    "next": lab(a.links[l]), "source": k,
                    "mu_hat": float(a.mu_hat[n]),
                    "rho_hat": None if a.last_hop else float(a.rho_hat_in.get((l, k), 0.0)),
                })
            out[lab(i)] = {"links": rows,
                           "rho_star": {k: float(v) for k, v in a.rho_star.items()}}
        return out


def softmin(x: float, y: float, tau: float) -> tuple[float, float]:
    """Smooth min and its derivative with respect to ``x``."""
    d = (y - x) / tau
    if d >= 0:
        e = math.exp(-d)
        return x - tau * math.log1p(e), 1.0 / (1.0 + e)
    e = math.exp(d)
    return y - tau * math.log1p(e), e / (1.0 + e)


def softplus(x: float, tau: float) -> tuple[float, float]:
    """Smooth max(0, x) and its derivative."""
    z = x / tau
    if z >= 0:
        e = math.exp(-z)
        return x + tau * math.log1p(e), 1.0 / (1.0 + e)
    e = math.exp(z)
    return tau * math.log1p(e), e / (1.0 + e)


def relative_change(new: float, old: float) -> float:
    return abs(new - old) / max(abs(new), 1.0)


def is_finite(x) -> bool:
    return all(math.isfinite(v) for v in np.ravel(x))

"""Slot-level Monte Carlo of a converged controller.

Two modes:

* ``saturated``: every buffer is always backlogged; measures the service
  each (node, next hop, source) pair actually receives, to check the rate
  model in isolation.
* ``closed``: Poisson packet arrivals at the admitted source rates, per-node
  per-source FIFO buffers, deadline drops, and token buckets enforcing the
  granted limits. Every control period the nodes re-estimate arrival rates
  from what they received and recompute their limit messages.

The controller's scheduling weights are frozen at the supplied state; only
the limit messages follow the measured traffic.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ._backend import kernels
from .errors import ConfigurationError
from .network import Network

log = logging.getLogger(__name__)

OCDR, PAIR_DRAW = 0, 1
STATS_COLUMNS = ("arrived", "dropped_deadline", "dropped_overflow", "delivered", "transmitted")


@dataclass
class SimMetrics:
    scheme: str
    seed: int
    slots: int
    duration: float
    delivered: dict            # k -> bit/s reaching the destination
    admitted: dict             # k -> bit/s entering the source buffer
    drop_fraction: dict        # k -> dropped / admitted packets
    violation: dict            # (node label, k) -> deadline drops / arrivals at that node
    in_flight: dict            # k -> packets still buffered at the end
    counts: dict = field(default_factory=dict)      # (node label, k) -> STATS_COLUMNS counts
    saturated: bool = False

    def row(self, scenario_id: str = "") -> dict:
        """Flat dict for one CSV row."""
        out = {"scenario": scenario_id, "scheme": self.scheme, "seed": self.seed,
               "slots": self.slots, "saturated": int(self.saturated)}
        for k in sorted(self.admitted):
            out[f"admitted_{k}"] = self.admitted[k]
            out[f"delivered_{k}"] = self.delivered[k]
            out[f"drop_{k}"] = self.drop_fraction[k]
        for (lab, k), v in sorted(self.violation.items()):
            out[f"viol_{lab}_{k}"] = v
        return out


class _Layout:
    """Flat arrays describing nodes, links and (link, source) pairs for the kernels."""

    def __init__(self, net: Network, mode: int):
        self.net = net
        self.nodes = list(net.order_down)
        n_links, link_off, gbar, beta = [], [], [], []
        pair_cum, self.pairs = [], []   # pairs: (node, agent pair index)
        for i in self.nodes:
            a = net.agents[i]
            link_off.append(len(gbar))
            n_links.append(len(a.links))
            gbar.extend(a.gbar)
            beta.extend(a.beta if a.beta is not None else np.ones(len(a.links)))
            acc = 0.0
            for l in range(len(a.links)):
                if mode == OCDR:
                    acc = 0.0
                for n in a.link_pairs[l]:
                    acc += max(float(a.alpha[n]), 0.0)
                    pair_cum.append(acc)
                    self.pairs.append((i, n))
        self.n_links = np.array(n_links, dtype=np.int64)
        self.link_off = np.array(link_off, dtype=np.int64)
        self.gbar = np.array(gbar, dtype=float)
        self.beta = np.array(beta, dtype=float)
        self.pair_cum = np.array(pair_cum, dtype=float)
        self.max_links = int(self.n_links.max()) if len(self.nodes) else 0
        self.pair_off = self._pair_offsets(net)

    def _pair_offsets(self, net):
        # indexed by link_off[n] + a; a node's terminator coincides with the
        # next node's first entry, so one trailing slot suffices
        offs = np.zeros(len(self.gbar) + 1, dtype=np.int64)
        p = 0
        for n, i in enumerate(self.nodes):
            a = net.agents[i]
            for l in range(len(a.links)):
                offs[self.link_off[n] + l] = p
                p += len(a.link_pairs[l])
            offs[self.link_off[n] + len(a.links)] = p
        return offs


def _draws(rng, n_slots, n_nodes, max_links):
    expo = rng.standard_exponential((n_slots, n_nodes, max_links))
    unif = rng.random((n_slots, n_nodes))
    return expo, unif


def _mode_of(net: Network) -> int:
    return OCDR if net.scheme.name == "ocdr" else PAIR_DRAW


def run_saturated(net: Network, n_slots: int, seed: int, chunk: int = 100_000) -> dict:
    """Per-pair throughput (bit/s) with every buffer backlogged.

    Returns ``{(node, next hop, k): rate}``.
    """
    mode = _mode_of(net)
    lay = _Layout(net, mode)
    rng = np.random.default_rng(seed)
    ch = net.channel
    bits_per_use = ch.W * ch.slot
    out = np.zeros(len(lay.pairs))
    done = 0
    while done < n_slots:
        m = min(chunk, n_slots - done)
        expo, unif = _draws(rng, m, len(lay.nodes), lay.max_links)
        kernels.saturated_slots(mode, lay.n_links, lay.link_off, lay.gbar, lay.beta,
                                lay.pair_off, lay.pair_cum, bits_per_use, expo, unif, out)
        done += m
    T = n_slots * ch.slot
    res = {}
    for p, (i, n) in enumerate(lay.pairs):
        a = net.agents[i]
        l, k = a.pairs[n]
        res[(i, a.links[l], k)] = out[p] / T
    return res


def estimate_arrival_rates(rx_bits: Mapping, window: float) -> dict:
    """Bits received per (previous hop, source) over ``window`` seconds, as bit/s."""
    if window <= 0:
        raise ConfigurationError("window must be positive")
    return {key: bits / window for key, bits in rx_bits.items()}


def run_sim(net: Network, rates: Mapping[int, float], duration: float, seed: int,
            packet_bits: float = 1.0, T1: float | None = None, queue_cap: int = 1 << 14,
            scheme: str | None = None) -> SimMetrics:
    """Closed-loop packet simulation of ``net`` with Poisson admission at ``rates``.

    ``T1`` is the control period (default 1000 slots). Deadlines come from
    the network's QoS spec; a packet still waiting (not yet started) when
    its wait exceeds the deadline is dropped.
    """
    ch = net.channel
    slot = ch.slot
    T1 = T1 if T1 is not None else 1000 * slot
    per = max(1, int(round(T1 / slot)))
    n_periods = max(1, int(math.ceil(duration / (per * slot))))
    mode = _mode_of(net)
    lay = _Layout(net, mode)
    rng = np.random.default_rng(seed)
    top = net.topology

    # one queue per (transmitter, source)
    qkeys = [(i, k) for i in lay.nodes for k in net.agents[i].sources]
    qidx = {key: n for n, key in enumerate(qkeys)}
    nq = len(qkeys)
    q_deadline = np.array([net.qos.deadline(i, k) for i, k in qkeys])
    q_head = np.zeros(nq, dtype=np.int64)
    q_count = np.zeros(nq, dtype=np.int64)
    q_resid = np.full(nq, float(packet_bits))
    q_started = np.zeros(nq, dtype=np.int64)
    q_times = np.zeros((nq, queue_cap))
    stats = np.zeros((nq, len(STATS_COLUMNS)), dtype=np.int64)

    npairs = len(lay.pairs)
    pair_src_q = np.zeros(npairs, dtype=np.int64)
    pair_dst_q = np.full(npairs, -1, dtype=np.int64)
    pair_meta = []
    for p, (i, n) in enumerate(lay.pairs):
        a = net.agents[i]
        l, k = a.pairs[n]
        j = a.links[l]
        pair_src_q[p] = qidx[(i, k)]
        if (j, k) in qidx:
            pair_dst_q[p] = qidx[(j, k)]
        pair_meta.append((i, l, j, k))
    tokens = np.zeros(npairs)
    token_rate = np.zeros(npairs)
    token_cap = np.zeros(npairs)
    pair_rx = np.zeros(npairs)
    # reverse hop order: a packet moves at most one hop per slot
    node_order = np.array(sorted(range(len(lay.nodes)), key=lambda n: lay.nodes[n],
                                 reverse=True), dtype=np.int64)
    src_q = {k: qidx[(s, k)] for s in top.sources for k in [s.index]
             if (s, k) in qidx}
    lam = {k: rates.get(k, 0.0) / packet_bits for k in src_q}

    def refresh_tokens():
        net.evaluate()
        for p, (i, l, j, k) in enumerate(pair_meta):
            a = net.agents[i]
            if a.last_hop:
                token_rate[p] = math.inf
                token_cap[p] = math.inf
            else:
                r = a.rho_hat_in.get((l, k), 0.0)
                token_rate[p] = r * slot
                token_cap[p] = r * net.qos.deadline(i, k) + packet_bits
        tokens[:] = np.minimum(np.maximum(tokens, 0.0), token_cap)

    net.evaluate()
    refresh_tokens()
    pend_q = np.zeros(0, dtype=np.int64)
    pend_t = np.zeros(0)
    t0 = 0.0
    for period in range(n_periods):
        t_end = t0 + per * slot
        # Poisson arrivals on [t0, t_end), merged in time order
        qs, ts = [pend_q], [pend_t]
        for k in sorted(src_q):
            if lam[k] <= 0:
                continue
            n = rng.poisson(lam[k] * (t_end - t0))
            ts.append(np.sort(rng.uniform(t0, t_end, n)))
            qs.append(np.full(n, src_q[k], dtype=np.int64))
        arr_t = np.concatenate(ts)
        arr_q = np.concatenate(qs)
        order = np.argsort(arr_t, kind="stable")
        arr_t, arr_q = arr_t[order], arr_q[order]
        expo, unif = _draws(rng, per, len(lay.nodes), lay.max_links)
        pair_rx[:] = 0.0
        used = kernels.closed_loop_slots(
            mode, t0, slot, ch.W * slot, float(packet_bits),
            lay.n_links, lay.link_off, lay.gbar, lay.beta, lay.pair_off, lay.pair_cum,
            pair_src_q, pair_dst_q, token_rate, tokens, token_cap,
            q_deadline, q_head, q_count, q_resid, q_times, q_started,
            arr_q, arr_t, expo, unif, stats, pair_rx, node_order)
        pend_q, pend_t = arr_q[used:], arr_t[used:]
        # end of control period: measured arrivals drive the limit messages
        window = per * slot
        for i, a in net.agents.items():
            rx = {}
            for p, (y, l, j, k) in enumerate(pair_meta):
                if j == i:
                    rx[(y, k)] = rx.get((y, k), 0.0) + pair_rx[p]
            a.arrivals = estimate_arrival_rates(rx, window)
            a.compute_shares()
        refresh_tokens()
        t0 = t_end

    T = n_periods * per * slot
    delivered, admitted, drop, in_flight, viol = {}, {}, {}, {}, {}
    for k, q in src_q.items():
        qs = [qidx[(i, kk)] for i, kk in qkeys if kk == k]
        admitted[k] = stats[q, 0] * packet_bits / T
        delivered[k] = stats[qs, 3].sum() * packet_bits / T
        dropped = stats[qs, 1].sum() + stats[qs, 2].sum()
        drop[k] = dropped / stats[q, 0] if stats[q, 0] else 0.0
        in_flight[k] = int(q_count[qs].sum()) + int(np.count_nonzero(pend_q == q))
    for (i, k), q in qidx.items():
        viol[(top.label(i), k)] = stats[q, 1] / stats[q, 0] if stats[q, 0] else 0.0
    counts = {(top.label(i), k): stats[n].copy() for n, (i, k) in enumerate(qkeys)}
    return SimMetrics(scheme=scheme or net.scheme.name, seed=seed, slots=n_periods * per,
                      duration=T, delivered=delivered, admitted=admitted, drop_fraction=drop,
                      violation=viol, in_flight=in_flight, counts=counts,
                      saturated=bool(stats[:, 2].sum() > 0))


def mm1_violation(rho: float, mu: float, deadline: float, n: int, seed: int) -> float:
    """Fraction of M/M/1 customers whose wait exceeds ``deadline`` (simulated)."""
    rng = np.random.default_rng(seed)
    inter = rng.exponential(1.0 / rho, n)
    serv = rng.exponential(1.0 / mu, n)
    return kernels.mm1_wait_exceed(inter, serv, deadline) / n

"""Static relay assignment baseline.

Every source is pinned to one relay per hop. A relay carrying several
sources time-shares its outgoing channel among them; the shares are chosen
to maximise the weighted sum rate under the same per-node admissibility
rule the adaptive schemes obey.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Mapping

import numpy as np
from scipy.optimize import linprog

from .channel import RateEngine
from .errors import EnumerationCapError
from .qos import QosSpec
from .topology import ChannelParams, NodeId, Topology

DEFAULT_CAP = 1 << 16


@dataclass(frozen=True)
class StaticAssignment:
    """``relay_of[(k, hop)]`` is the relay index m (1-based) used by source k."""

    relay_of: tuple  # sorted ((k, hop), m) items, hashable

    @classmethod
    def from_mapping(cls, mapping: Mapping) -> "StaticAssignment":
        return cls(tuple(sorted(mapping.items())))

    def as_dict(self) -> dict:
        return dict(self.relay_of)

    def path(self, topology: Topology, k: int) -> list[NodeId]:
        """Source, relays and destination of source k."""
        m = self.as_dict()
        nodes = [NodeId.source(k)]
        nodes += [NodeId.relay(l, m[(k, l)]) for l in range(1, topology.L + 1)]
        nodes.append(topology.destination_of(k))
        return nodes

    def edges(self, topology: Topology) -> set:
        """(i, j, k) triples used by the assignment."""
        out = set()
        for k in range(1, topology.K + 1):
            p = self.path(topology, k)
            out.update((a, b, k) for a, b in zip(p, p[1:]))
        return out

    def describe(self, M: int) -> str:
        return ";".join(f"k{k}h{l}=R{(l - 1) * M + m}" for (k, l), m in self.relay_of)


@dataclass
class StaticResult:
    F: float
    rho: dict            # k -> admitted rate
    shares: dict         # (relay, k) -> time share
    F_equal: float       # same paths, shared relays split equally


def enumerate_assignments(K: int, L: int, M: int, cap: int = DEFAULT_CAP) -> Iterator[StaticAssignment]:
    """All M**(K*L) assignments, in lexicographic order of (k, hop)."""
    n = M ** (K * L)
    if n > cap:
        raise EnumerationCapError(
            f"{n} static assignments exceed the cap of {cap}; pass a larger cap to override")
    keys = [(k, l) for k in range(1, K + 1) for l in range(1, L + 1)]
    for combo in itertools.product(range(1, M + 1), repeat=len(keys)):
        yield StaticAssignment(tuple(zip(keys, combo)))


def _path_terms(assignment, topology, channel, qos, engine):
    """Per source: list of (node, capacity, cumulative penalty) along its path."""
    terms = {}
    for k in range(1, topology.K + 1):
        p = assignment.path(topology, k)
        acc, rows = 0.0, []
        for a, b in zip(p, p[1:]):
            acc += qos.penalty(a, k)
            rows.append((a, engine.single(topology.mean_snr(a, b, channel)), acc))
        terms[k] = rows
    return terms


def _rate(rows, shares, k) -> float:
    return max(0.0, min(shares.get((a, k), 1.0) * c - pen for a, c, pen in rows))


def _solve_shares(terms, weights, served):
    """LP over (r_k for k in served, s_ak for shared relays); None if infeasible."""
    shared = sorted({(a, k) for k in served for a, _, _ in terms[k] if not a.is_source})
    nr, ns = len(served), len(shared)
    sidx = {key: nr + n for n, key in enumerate(shared)}
    c = np.zeros(nr + ns)
    for n, k in enumerate(served):
        c[n] = -weights.get(k, 0.0)
    A, b = [], []
    for n, k in enumerate(served):
        for a, cap, pen in terms[k]:
            row = np.zeros(nr + ns)
            row[n] = 1.0
            if (a, k) in sidx:
                row[sidx[(a, k)]] = -cap
                A.append(row)
                b.append(-pen)
            else:
                A.append(row)
                b.append(cap - pen)
    for relay in sorted({a for a, _ in shared}):
        row = np.zeros(nr + ns)
        for (a, k), col in sidx.items():
            if a == relay:
                row[col] = 1.0
        A.append(row)
        b.append(1.0)
    res = linprog(c, A_ub=np.array(A), b_ub=np.array(b), bounds=[(0, None)] * (nr + ns),
                  method="highs")
    if res.status != 0:
        return None
    rho = {k: float(res.x[n]) for n, k in enumerate(served)}
    shares = {key: float(res.x[col]) for key, col in sidx.items()}
    return -float(res.fun), rho, shares


def evaluate_static(assignment: StaticAssignment, topology: Topology, channel: ChannelParams,
                    qos: QosSpec, weights: Mapping[int, float],
                    engine: RateEngine | None = None) -> StaticResult:
    """Best weighted sum rate for fixed paths.

    Shared relays split time optimally: a linear program per subset of
    sources that are actually served (a source whose path cannot meet its
    penalties with any share contributes zero and must not consume time).
    """
    engine = engine or RateEngine(channel.W)
    terms = _path_terms(assignment, topology, channel, qos, engine)
    ks = list(range(1, topology.K + 1))
    best = (0.0, {k: 0.0 for k in ks}, {})
    for size in range(len(ks), 0, -1):
        for served in itertools.combinations(ks, size):
            sol = _solve_shares(terms, weights, list(served))
            if sol is not None and sol[0] > best[0] * (1 + 1e-12):
                F, rho, shares = sol
                best = (F, {k: rho.get(k, 0.0) for k in ks}, shares)
    # equal split on shared relays, reported alongside
    load = {}
    for k in ks:
        for a, _, _ in terms[k]:
            load[a] = load.get(a, 0) + 1
    eq = {(a, k): 1.0 / load[a] for k in ks for a, _, _ in terms[k] if not a.is_source}
    F_equal = sum(weights.get(k, 0.0) * _rate(terms[k], eq, k) for k in ks)
    return StaticResult(F=best[0], rho=best[1], shares=best[2], F_equal=F_equal)


def best_static(topology: Topology, channel: ChannelParams, qos: QosSpec,
                weights: Mapping[int, float], cap: int = DEFAULT_CAP):
    """(assignment, result) maximising F; ties go to the earliest assignment."""
    engine = RateEngine(channel.W)
    best = None
    for a in enumerate_assignments(topology.K, topology.L, topology.M, cap):
        r = evaluate_static(a, topology, channel, qos, weights, engine)
        if best is None or r.F > best[1].F * (1 + 1e-12) + 1e-12:
            best = (a, r)
    return best


def static_network(topology: Topology, channel: ChannelParams, qos: QosSpec,
                   weights: Mapping[int, float], assignment: StaticAssignment,
                   result: StaticResult):
    """A time-sharing network pinned to ``assignment`` with the optimal shares.

    Used to run the baseline through the same evaluation and simulation code
    as the adaptive schemes.
    """
    from .tcdr import build

    net = build(topology, channel, qos, weights, allowed=assignment.edges(topology))
    for i, a in net.agents.items():
        if i.is_source or not a.pairs:
            continue
        for n, (_, k) in enumerate(a.pairs):
            a.alpha[n] = result.shares.get((i, k), 1.0 if result.rho.get(k, 0.0) > 0 else 0.0)
        if a.alpha.max() > 0:
            a.alpha = a.alpha / a.alpha.max()
    net.scheme.name = "static"
    return net

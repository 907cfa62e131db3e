"""Layered K-source, L-hop, M-relay-per-hop linear networks."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, NamedTuple

from .errors import ConfigurationError, GeometryError


class NodeId(NamedTuple):
    """A node in the layered graph.

    ``hop`` is 0 for sources, 1..L for relays and L+1 for destinations, so the
    natural ordering is by hop then index (``kind`` follows from the hop).
    A tuple rather than a dataclass: node ids are hashed in every inner loop.
    """

    hop: int
    index: int
    kind: str

    @classmethod
    def source(cls, k: int) -> "NodeId":
        return cls(0, k, "S")

    @classmethod
    def relay(cls, hop: int, m: int) -> "NodeId":
        return cls(hop, m, "R")

    @classmethod
    def destination(cls, k: int, L: int) -> "NodeId":
        return cls(L + 1, k, "D")

    @property
    def is_source(self) -> bool:
        return self.kind == "S"

    @property
    def is_relay(self) -> bool:
        return self.kind == "R"

    @property
    def is_destination(self) -> bool:
        return self.kind == "D"

    def label(self, M: int) -> str:
        # relays are numbered flat in hop order: R1..RM for hop 1, R(M+1).. for hop 2
        if self.kind == "R":
            return f"R{(self.hop - 1) * M + self.index}"
        return f"{self.kind}{self.index}"


@dataclass(frozen=True)
class ChannelParams:
    W: float = 1e6
    snr_scale: float = 1.0
    delta: float = 3.0
    slot: float = 1e-5

    def __post_init__(self):
        if not self.W > 0:
            raise ConfigurationError(f"bandwidth W must be positive, got {self.W}")
        if not self.snr_scale > 0:
            raise ConfigurationError(f"snr_scale must be positive, got {self.snr_scale}")
        if not self.delta >= 0:
            raise ConfigurationError(f"path-loss exponent must be >= 0, got {self.delta}")
        if not self.slot > 0:
            raise ConfigurationError(f"slot duration must be positive, got {self.slot}")


def avg_snr(params: ChannelParams, dij: float) -> float:
    """Mean received SNR over distance ``dij`` under the path-loss law."""
    if not dij > 0:
        raise GeometryError(f"link length must be positive, got {dij}")
    return params.snr_scale * dij ** (-params.delta)


@dataclass(frozen=True)
class Topology:
    K: int
    L: int
    M: int
    positions: Mapping[NodeId, float]
    next_hops: Mapping[NodeId, tuple[NodeId, ...]]
    prev_hops: Mapping[NodeId, tuple[NodeId, ...]]

    @property
    def nodes(self) -> list[NodeId]:
        return sorted(self.positions)

    @property
    def sources(self) -> list[NodeId]:
        return [NodeId.source(k) for k in range(1, self.K + 1)]

    @property
    def destinations(self) -> list[NodeId]:
        return [NodeId.destination(k, self.L) for k in range(1, self.K + 1)]

    def relays(self, hop: int) -> list[NodeId]:
        return [NodeId.relay(hop, m) for m in range(1, self.M + 1)]

    @property
    def transmitters(self) -> list[NodeId]:
        """Sources and relays, ordered by hop then index."""
        return [n for n in self.nodes if not n.is_destination]

    def destination_of(self, k: int) -> NodeId:
        return NodeId.destination(k, self.L)

    def carried_sources(self, node: NodeId) -> tuple[int, ...]:
        if node.is_source:
            return (node.index,)
        if node.is_relay:
            return tuple(range(1, self.K + 1))
        return ()

    def is_last_hop(self, node: NodeId) -> bool:
        return node.is_relay and node.hop == self.L

    def out_links(self, node: NodeId, k: int) -> tuple[NodeId, ...]:
        """Next hops that may carry source ``k`` data out of ``node``."""
        if self.is_last_hop(node):
            return (self.destination_of(k),)
        return self.next_hops[node]

    def distance(self, i: NodeId, j: NodeId) -> float:
        return abs(self.positions[i] - self.positions[j])

    def mean_snr(self, i: NodeId, j: NodeId, params: ChannelParams) -> float:
        return avg_snr(params, self.distance(i, j))

    def edges(self) -> list[tuple[NodeId, NodeId]]:
        return [(i, j) for i in self.transmitters for j in self.next_hops[i]]

    def label(self, node: NodeId) -> str:
        return node.label(self.M)

    def node_by_label(self, label: str) -> NodeId:
        for n in self.positions:
            if n.label(self.M) == label:
                return n
        raise ConfigurationError(f"unknown node label {label!r}")

    def with_positions(self, updates: Mapping[str, float]) -> "Topology":
        pos = {self.label(n): p for n, p in self.positions.items()}
        pos.update(updates)
        return build_linear(self.K, self.L, self.M, pos)


def node_labels(K: int, L: int, M: int) -> list[str]:
    labels = [f"S{k}" for k in range(1, K + 1)]
    labels += [f"R{r}" for r in range(1, L * M + 1)]
    labels += [f"D{k}" for k in range(1, K + 1)]
    return labels


def build_linear(K: int, L: int, M: int, positions: Mapping[str | NodeId, float]) -> Topology:
    """Wire the full layered graph.

    ``positions`` may be keyed by ``NodeId`` or by label (``S1``, ``R3``,
    ``D2``; relays numbered flat in hop order).
    """
    for name, v in (("K", K), ("L", L), ("M", M)):
        if int(v) != v or v < 1:
            raise ConfigurationError(f"{name} must be a positive integer, got {v!r}")

    ids = [NodeId.source(k) for k in range(1, K + 1)]
    ids += [NodeId.relay(l, m) for l in range(1, L + 1) for m in range(1, M + 1)]
    ids += [NodeId.destination(k, L) for k in range(1, K + 1)]

    by_label = {}
    for key, p in positions.items():
        label = key.label(M) if isinstance(key, NodeId) else str(key)
        by_label[label] = float(p)
    pos = {}
    for n in ids:
        label = n.label(M)
        if label not in by_label:
            raise ConfigurationError(f"missing position for node {label}")
        p = by_label[label]
        if p != p or p in (float("inf"), float("-inf")):
            raise ConfigurationError(f"position of {label} must be finite")
        pos[n] = p
    extra = set(by_label) - {n.label(M) for n in ids}
    if extra:
        raise ConfigurationError(f"positions given for unknown nodes: {sorted(extra)}")

    nxt: dict[NodeId, tuple[NodeId, ...]] = {}
    for n in ids:
        if n.is_source:
            nxt[n] = tuple(NodeId.relay(1, m) for m in range(1, M + 1))
        elif n.is_relay and n.hop < L:
            nxt[n] = tuple(NodeId.relay(n.hop + 1, m) for m in range(1, M + 1))
        elif n.is_relay:
            nxt[n] = tuple(NodeId.destination(k, L) for k in range(1, K + 1))
        else:
            nxt[n] = ()
    prv: dict[NodeId, list[NodeId]] = {n: [] for n in ids}
    for i in ids:
        for j in nxt[i]:
            prv[j].append(i)
    return Topology(
        K=K, L=L, M=M,
        positions=pos,
        next_hops=nxt,
        prev_hops={n: tuple(sorted(v)) for n, v in prv.items()},
    )

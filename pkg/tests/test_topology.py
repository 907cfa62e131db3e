import math

import pytest
from hypothesis import given, strategies as st

from dynroute.errors import ConfigurationError, GeometryError
from dynroute.topology import ChannelParams, NodeId, avg_snr, build_linear, node_labels

from conftest import chain, threehop, twohop


def labels(top, nodes):
    return {top.label(n) for n in nodes}


def test_twohop_wiring():
    top = twohop()
    s1, r1 = top.node_by_label("S1"), top.node_by_label("R1")
    assert labels(top, top.next_hops[s1]) == {"R1", "R2"}
    assert labels(top, top.next_hops[r1]) == {"D1", "D2"}
    assert top.is_last_hop(r1)
    assert labels(top, top.out_links(r1, 2)) == {"D2"}


def test_minimal_chain():
    top = chain()
    r1 = top.node_by_label("R1")
    assert labels(top, top.prev_hops[r1]) == {"S1"}
    assert labels(top, top.next_hops[r1]) == {"D1"}


def test_threehop_wiring():
    top = threehop()
    r1, r3 = top.node_by_label("R1"), top.node_by_label("R3")
    assert labels(top, top.next_hops[r1]) == {"R3", "R4"}
    assert labels(top, top.prev_hops[r3]) == {"R1", "R2"}
    assert not top.is_last_hop(r1) and top.is_last_hop(r3)


@pytest.mark.parametrize("d,g", [(0.5, 8.0), (1.0, 1.0), (0.1, 1000.0)])
def test_avg_snr_examples(d, g):
    assert avg_snr(ChannelParams(), d) == pytest.approx(g)


@pytest.mark.parametrize("d", [0.0, -0.2])
def test_avg_snr_rejects_nonpositive(d):
    with pytest.raises(GeometryError):
        avg_snr(ChannelParams(), d)


@given(st.floats(1e-3, 10), st.floats(1e-3, 10), st.floats(0.5, 6))
def test_avg_snr_decreasing(d1, d2, delta):
    p = ChannelParams(delta=delta)
    if d1 < d2:
        assert avg_snr(p, d1) > avg_snr(p, d2)


def _positions(K, L, M):
    return {lab: 0.01 + 0.98 * n / (2 * K + L * M) for n, lab in enumerate(node_labels(K, L, M))}


@given(st.integers(1, 3), st.integers(1, 3), st.integers(1, 3))
def test_counts_and_duality(K, L, M):
    top = build_linear(K, L, M, _positions(K, L, M))
    assert len(top.nodes) == 2 * K + L * M
    assert len(top.edges()) == K * M + (L - 1) * M * M + M * K
    forward = {(i, j) for i in top.nodes for j in top.next_hops[i]}
    backward = {(y, j) for j in top.nodes for y in top.prev_hops[j]}
    assert forward == backward


def test_labels_roundtrip():
    top = threehop()
    for n in top.nodes:
        assert top.node_by_label(top.label(n)) == n
    assert NodeId.relay(2, 1).label(2) == "R3"


def test_missing_position():
    with pytest.raises(ConfigurationError):
        build_linear(1, 1, 1, {"S1": 0.0, "D1": 1.0})


def test_extra_position():
    with pytest.raises(ConfigurationError):
        build_linear(1, 1, 1, {"S1": 0.0, "R1": 0.5, "D1": 1.0, "R7": 0.3})


@pytest.mark.parametrize("K,L,M", [(0, 1, 1), (1, 0, 1), (1, 1, 0)])
def test_bad_sizes(K, L, M):
    with pytest.raises(ConfigurationError):
        build_linear(K, L, M, {})


def test_nonfinite_position():
    with pytest.raises(ConfigurationError):
        build_linear(1, 1, 1, {"S1": math.nan, "R1": 0.5, "D1": 1.0})


def test_channel_params_validation():
    with pytest.raises(ConfigurationError):
        ChannelParams(W=0)
    with pytest.raises(ConfigurationError):
        ChannelParams(slot=-1)


def test_coincident_nodes_rejected_on_use():
    top = twohop(0.2, 0.5)  # R1 sits on S2
    with pytest.raises(GeometryError):
        top.mean_snr(top.node_by_label("S2"), top.node_by_label("R1"), ChannelParams())


def test_with_positions():
    top = twohop().with_positions({"R1": 0.3})
    assert top.positions[top.node_by_label("R1")] == 0.3

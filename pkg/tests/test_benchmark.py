import math

import pytest
from hypothesis import given, settings, strategies as st

from dynroute.benchmark import (StaticAssignment, best_static, enumerate_assignments,
                                evaluate_static, static_network)
from dynroute.channel import mean_rate_single
from dynroute.errors import EnumerationCapError
from dynroute.qos import QosSpec
from dynroute.topology import ChannelParams

from conftest import threehop, twohop

CH = ChannelParams(W=1e6)
Q = QosSpec(1e-4, 1e-6)
PEN = math.log(1e6) / 1e-4


@pytest.mark.parametrize("K,L,M,n", [(2, 1, 2, 4), (2, 2, 2, 16), (1, 1, 1, 1), (1, 3, 2, 8)])
def test_enumeration_counts(K, L, M, n):
    got = list(enumerate_assignments(K, L, M))
    assert len(got) == n and len(set(got)) == n


def test_enumeration_cap():
    with pytest.raises(EnumerationCapError):
        list(enumerate_assignments(3, 3, 4, cap=1000))


def _single(top, a, b):
    return mean_rate_single(top.mean_snr(top.node_by_label(a), top.node_by_label(b), CH), CH.W)


@given(st.floats(0.25, 0.75), st.floats(0.25, 0.75))
@settings(max_examples=20, deadline=None)
def test_disjoint_paths_closed_form(r1, r2):
    top = twohop(r1, r2)
    a = StaticAssignment.from_mapping({(1, 1): 1, (2, 1): 2})
    res = evaluate_static(a, top, CH, Q, {1: 1.0, 2: 1.0})
    want = {
        1: max(0.0, min(_single(top, "S1", "R1") - PEN, _single(top, "R1", "D1") - 2 * PEN)),
        2: max(0.0, min(_single(top, "S2", "R2") - PEN, _single(top, "R2", "D2") - 2 * PEN)),
    }
    for k in (1, 2):
        assert res.rho[k] == pytest.approx(want[k], rel=1e-9, abs=1e-6)
    assert res.F == pytest.approx(res.F_equal, rel=1e-9)


def test_shared_relay_never_worse_than_equal_split():
    top = twohop(0.4, 0.6)
    for a in enumerate_assignments(2, 1, 2):
        r = evaluate_static(a, top, CH, Q, {1: 1.0, 2: 1.0})
        assert r.F >= r.F_equal * (1 - 1e-9)
        for relay in {key[0] for key in r.shares}:
            assert sum(v for (x, _), v in r.shares.items() if x == relay) <= 1 + 1e-9


def test_symmetric_assignments_equivalent():
    top = twohop(0.5, 0.5)
    w = {1: 1.0, 2: 1.0}
    a = evaluate_static(StaticAssignment.from_mapping({(1, 1): 1, (2, 1): 2}), top, CH, Q, w)
    b = evaluate_static(StaticAssignment.from_mapping({(1, 1): 2, (2, 1): 1}), top, CH, Q, w)
    assert a.F == pytest.approx(b.F, rel=1e-12)
    best, res = best_static(top, CH, Q, w)
    # ties go to the first assignment in enumeration order
    assert res.F == pytest.approx(6.6391e6, abs=200)
    assert best == next(a for a in enumerate_assignments(2, 1, 2)
                        if evaluate_static(a, top, CH, Q, w).F >= res.F * (1 - 1e-12))


def test_best_static_three_hop_is_argmax():
    top = threehop(0.3, 0.8)
    w = {1: 1.0, 2: 1.0}
    _, res = best_static(top, CH, Q, w)
    assert res.F == pytest.approx(max(evaluate_static(a, top, CH, Q, w).F
                                      for a in enumerate_assignments(2, 2, 2)))


@pytest.mark.parametrize("pos", [(0.5, 0.5), (0.3, 0.6), (0.7, 0.4)])
def test_static_network_reproduces_lp(pos):
    from dynroute.cli import settle
    top = twohop(*pos)
    w = {1: 1.0, 2: 1.0}
    a, res = best_static(top, CH, Q, w)
    net = static_network(top, CH, Q, w, a, res)
    settle(net)
    assert net.evaluate().F == pytest.approx(res.F, rel=1e-6)


def test_describe_and_edges():
    top = twohop()
    a = StaticAssignment.from_mapping({(1, 1): 2, (2, 1): 2})
    assert a.describe(2) == "k1h1=R2;k2h1=R2"
    assert len(a.edges(top)) == 4

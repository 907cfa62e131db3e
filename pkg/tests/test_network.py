import math

import pytest

from dynroute.channel import mean_rate_single
from dynroute.network import Network, softmin, softplus
from dynroute.ocdr import OcdrScheme
from dynroute.qos import QosSpec
from dynroute.tcdr import TcdrScheme
from dynroute.topology import ChannelParams

from conftest import chain, threehop, twohop
from gradcheck import run_gradcheck

PEN = math.log(1e6) / 1e-4


def chain_value(top, ch):
    """Hand composition of the admissible rate along a single chain."""
    nodes = [top.node_by_label(l) for l in ["S1"] + [f"R{l}" for l in range(1, top.L + 1)] + ["D1"]]
    caps = [mean_rate_single(top.mean_snr(a, b, ch), ch.W) for a, b in zip(nodes, nodes[1:])]
    limit = math.inf
    for c in reversed(caps):
        limit = max(0.0, min(c, limit) - PEN)
    return limit


@pytest.mark.parametrize("L", [1, 2, 3])
@pytest.mark.parametrize("scheme", [OcdrScheme, TcdrScheme])
def test_chain_equals_hand_composition(L, scheme):
    ch = ChannelParams(W=1e6)
    top = chain(L)
    net = Network(top, ch, QosSpec(1e-4, 1e-6), {1: 1.0}, scheme())
    assert net.evaluate().F == pytest.approx(chain_value(top, ch), rel=1e-12)


def test_cold_start_shares_and_limits():
    net = Network(twohop(), ChannelParams(W=1e6), QosSpec(), {1: 1, 2: 1}, OcdrScheme())
    net.evaluate()
    r1 = net.topology.node_by_label("R1")
    s1 = net.topology.node_by_label("S1")
    # no arrivals yet: a source predecessor gets the full rho*
    assert net.agents[r1].shares[(s1, 1)] == 1.0


def test_arrivals_follow_flows():
    net = Network(twohop(0.4, 0.6), ChannelParams(W=1e6), QosSpec(), {1: 1, 2: 1}, TcdrScheme())
    res = net.evaluate(update_arrivals=True)
    top = net.topology
    total = 0.0
    for m in (1, 2):
        total += net.agents[top.node_by_label(f"R{m}")].arrivals.get((top.node_by_label("S1"), 1), 0.0)
    assert total == pytest.approx(res.rho[1], rel=1e-12)


def test_locality_of_messages():
    """Each agent only reads its own links and the messages of its neighbours."""
    net = Network(threehop(0.3, 0.8), ChannelParams(W=1e6), QosSpec(), {1: 1, 2: 1}, OcdrScheme())
    for _ in range(3):
        net.evaluate(update_arrivals=True, with_grad=True)
    top = net.topology
    for i, a in net.agents.items():
        assert set(a.links) <= set(top.next_hops[i]) | set(top.destinations)
        for (y, _k) in a.arrivals:
            assert y in top.prev_hops[i]
        for k, entries in a.price_in.items():
            for y, _p in entries:
                assert y in top.prev_hops[i]
        for (l, _k) in a.rho_hat_in:
            assert a.links[l] in top.next_hops[i]


def test_smoothing_limits():
    v, w = softmin(1.0, 3.0, 1e-6)
    assert v == pytest.approx(1.0) and w == pytest.approx(1.0)
    v, w = softplus(-1.0, 1e-6)
    assert v == pytest.approx(0.0, abs=1e-9) and w == pytest.approx(0.0, abs=1e-9)
    v, _ = softmin(1.0, 1.0, 0.1)
    assert v < 1.0


def test_smoothed_objective_approaches_exact():
    net = Network(twohop(0.35, 0.6), ChannelParams(W=1e6), QosSpec(), {1: 1, 2: 1}, OcdrScheme())
    for _ in range(3):
        net.evaluate(update_arrivals=True)
    exact = net.evaluate().F
    gaps = [abs(net.evaluate(smooth=s).F_smooth - exact) for s in (1.0, 0.3, 0.03)]
    assert gaps[0] > gaps[1] >= gaps[2]
    assert gaps[2] <= 1e-9 * exact


def test_edge_params_favour_edges():
    net = Network(twohop(), ChannelParams(W=1e6), QosSpec(), {1: 1, 2: 1}, OcdrScheme())
    top = net.topology
    s1, r1 = top.node_by_label("S1"), top.node_by_label("R1")
    x = net.edge_params({(s1, r1, 1)})
    net.set_params(x)
    a = net.agents[s1]
    assert a.beta[0] == 1.0 and a.beta[1] == pytest.approx(0.05)


@pytest.mark.parametrize("scheme", ["ocdr", "tcdr"])
def test_gradient_finite_differences(scheme):
    errors, tries = run_gradcheck(scheme, n_points=30, seed=3)
    assert len(errors) == 30
    assert max(errors) < 1e-4

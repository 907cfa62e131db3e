"""Compiled and pure-Python kernels must agree on identical inputs."""
import numpy as np
import pytest
from hypothesis import given, strategies as st

from dynroute import _backend, _purekernels as pure, simulator
from dynroute.cli import settle
from dynroute.ocdr import run_control_loop_ocdr
from dynroute.qos import QosSpec
from dynroute.tcdr import run_control_loop_td
from dynroute.topology import ChannelParams

from conftest import chain, twohop

compiled = _backend.available().get("cython")
needs_ext = pytest.mark.skipif(compiled is None, reason="compiled kernels not built")


def test_backend_name():
    assert _backend.NAME in ("cython", "python")


@needs_ext
@given(st.floats(1e-6, 1e4))
def test_exp_e1(b):
    assert compiled.exp_e1(b) == pytest.approx(pure.exp_e1(b), rel=1e-14)


@needs_ext
@given(st.floats(1e-3, 10.0), st.lists(st.floats(1e-3, 10.0), min_size=0, max_size=3))
def test_opp_integrals(c, coeffs):
    a = compiled.opp_integrals(c, np.array(coeffs))
    b = pure.opp_integrals(c, np.array(coeffs))
    for x, y in zip(a, b):
        np.testing.assert_allclose(x, y, rtol=1e-12, atol=1e-15)


@needs_ext
def test_mm1():
    rng = np.random.default_rng(0)
    inter = rng.exponential(1.0, 20000)
    serv = rng.exponential(0.8, 20000)
    assert compiled.mm1_wait_exceed(inter, serv, 2.0) == pure.mm1_wait_exceed(inter, serv, 2.0)


def _converged(scheme):
    top, ch, q = twohop(0.4, 0.6), ChannelParams(W=1e6), QosSpec()
    fn = run_control_loop_ocdr if scheme == "ocdr" else run_control_loop_td
    rep, net = fn(top, ch, q, {1: 1.0, 2: 1.0})
    return rep, net


@needs_ext
@pytest.mark.parametrize("scheme", ["ocdr", "tcdr"])
def test_saturated_slots(scheme, monkeypatch):
    _, net = _converged(scheme)
    monkeypatch.setattr(simulator, "kernels", compiled)
    a = simulator.run_saturated(net, 5000, seed=3)
    monkeypatch.setattr(simulator, "kernels", pure)
    b = simulator.run_saturated(net, 5000, seed=3)
    assert a.keys() == b.keys()
    for key in a:
        assert a[key] == pytest.approx(b[key], rel=1e-12)


@needs_ext
@pytest.mark.parametrize("scheme", ["ocdr", "tcdr"])
def test_closed_loop_slots(scheme, monkeypatch):
    ch = ChannelParams(W=1.0, slot=0.01)
    q = QosSpec(10.0, 1e-3)
    fn = run_control_loop_ocdr if scheme == "ocdr" else run_control_loop_td
    rep, net = fn(chain(2), ch, q, {1: 1.0})
    out = []
    for k in (compiled, pure):
        monkeypatch.setattr(simulator, "kernels", k)
        settle(net)
        out.append(simulator.run_sim(net, rep.rho, 200.0, seed=5))
    a, b = out
    assert a.delivered == b.delivered
    for key in a.counts:
        np.testing.assert_array_equal(a.counts[key], b.counts[key])

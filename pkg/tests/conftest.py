import numpy as np
import pytest

from dynroute.qos import QosSpec
from dynroute.topology import ChannelParams, build_linear

W = 1e6


@pytest.fixture
def channel():
    return ChannelParams(W=W)


@pytest.fixture
def qos():
    return QosSpec(1e-4, 1e-6)


def twohop(r1=0.5, r2=0.5):
    return build_linear(2, 1, 2, {"S1": 0.0, "S2": 0.2, "D1": 1.0, "D2": 0.8,
                                  "R1": r1, "R2": r2})


def threehop(r2=0.1, r4=0.7, r1=0.2, r3=0.7):
    return build_linear(2, 2, 2, {"S1": 0.0, "S2": 0.0, "D1": 1.0, "D2": 1.0,
                                  "R1": r1, "R2": r2, "R3": r3, "R4": r4})


def chain(L=1):
    pos = {"S1": 0.0, "D1": 1.0}
    for l in range(1, L + 1):
        pos[f"R{l}"] = l / (L + 1)
    return build_linear(1, L, 1, pos)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)

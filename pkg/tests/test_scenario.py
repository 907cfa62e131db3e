from pathlib import Path

import numpy as np
import pytest

from dynroute.errors import ConfigurationError, ScenarioParseError
from dynroute.scenario import _range, load_scenario, load_sweep, parse_scenario_text

ROOT = Path(__file__).resolve().parents[1]
SCEN = ROOT / "scenarios"

BASE = """\
[network]
K = 1
L = 1
M = 1

[positions]
S1 = 0
R1 = 0.5
D1 = 1
"""


@pytest.mark.parametrize("name", ["twohop", "threehop", "chain"])
def test_bundled_scenarios_load(name):
    sc = load_scenario(SCEN / f"{name}.cfg")
    assert sc.name == name
    assert sc.topology.K >= 1


@pytest.mark.parametrize("name", ["twohop_grid", "threehop_grid", "weights_study"])
def test_bundled_sweeps_load(name):
    spec = load_sweep(SCEN / f"{name}.cfg")
    assert spec.schemes == ("ocdr", "tcdr", "static")


def test_defaults():
    sc = parse_scenario_text(BASE)
    assert sc.channel.W == 1e6
    assert sc.qos.default_loss == 1e-6
    assert sc.weights == {1: 1.0}


def test_per_node_qos_and_control():
    sc = parse_scenario_text(BASE + "[qos]\ndeadline.R1.1 = 2e-4\n[control]\ntol = 1e-6\n"
                             "smoothing = 0.1, 0\n")
    r1 = sc.topology.node_by_label("R1")
    assert sc.qos.deadline(r1, 1) == 2e-4
    assert sc.hyper.tol == 1e-6 and sc.hyper.smoothing == (0.1, 0.0)


@pytest.mark.parametrize("extra,line,frag", [
    ("[weights]\nf1 = abc\n", 12, "[weights] f1"),
    ("[weights]\nf3 = 1\n", 12, "expected f1..f1"),
    ("[control]\nbogus = 1\n", 12, "unknown control parameter"),
    ("[qos]\ndeadline.R9.1 = 1\n", 12, "unknown node label"),
])
def test_errors_carry_line_numbers(extra, line, frag):
    with pytest.raises(ScenarioParseError) as exc:
        parse_scenario_text(BASE + "\n" + extra, "x.cfg")
    msg = str(exc.value)
    assert msg.startswith(f"x.cfg:{line}:") and frag in msg


def test_missing_sections():
    with pytest.raises(ScenarioParseError, match="missing required key 'K'"):
        parse_scenario_text("[network]\nL = 1\n")
    with pytest.raises(ScenarioParseError, match="positions"):
        parse_scenario_text("[network]\nK = 1\nL = 1\nM = 1\n")


def test_missing_file():
    with pytest.raises(ConfigurationError):
        load_scenario("/nonexistent/x.cfg")


def test_range():
    np.testing.assert_allclose(_range("0.3:0.7:0.05"), np.arange(9) * 0.05 + 0.3)
    assert list(_range("0.4")) == [0.4]
    for bad in ("1:0:0.1", "0:1:0.3", "0:1:0", "1:2"):
        with pytest.raises(ValueError):
            _range(bad)


def test_sweep_errors(tmp_path):
    (tmp_path / "s.cfg").write_text(BASE)
    (tmp_path / "w.cfg").write_text("[sweep]\nscenario = s.cfg\nkind = positions\n"
                                    "[grid]\nR7 = 0:1:0.5\n")
    with pytest.raises(ScenarioParseError, match="w.cfg:5"):
        load_sweep(tmp_path / "w.cfg")
    (tmp_path / "k.cfg").write_text("[sweep]\nscenario = s.cfg\nkind = weights\n"
                                    "[placements]\nratios = 1, 2\n")
    with pytest.raises(ScenarioParseError, match="K = 2"):
        load_sweep(tmp_path / "k.cfg")

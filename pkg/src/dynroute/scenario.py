"""Scenario and sweep-spec files (INI syntax).

A scenario file::

    [network]
    K = 2
    L = 1
    M = 2

    [positions]          ; one entry per node label, in [0, 1]
    S1 = 0.0
    ...

    [channel]            ; all optional
    W = 1e6
    snr_scale = 1
    delta = 3
    slot = 1e-5

    [qos]                ; defaults plus optional per-node overrides
    deadline = 1e-4
    loss = 1e-6
    deadline.R1.1 = 2e-4 ; node label . source
    loss.R1.1 = 1e-5

    [weights]
    f1 = 1
    f2 = 1

    [control]            ; any Hyperparams field
    tol = 1e-5

A sweep spec::

    [sweep]
    scenario = twohop.cfg        ; relative to the spec file
    kind = positions             ; or: weights
    schemes = ocdr, tcdr, static
    output = twohop_grid.csv
    seed = 0

    [grid]                       ; kind = positions: label = start:stop:step
    R1 = 0.3:0.7:0.05
    R2 = 0.3:0.7:0.05

    [placements]                 ; kind = weights
    count = 100
    low = 0.1
    high = 0.9
    ratios = 1, 2, 3, 4, 5
"""
from __future__ import annotations

import configparser
import dataclasses
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .control import Hyperparams
from .errors import ConfigurationError, DynRouteError, ScenarioParseError
from .qos import QosSpec
from .topology import ChannelParams, Topology, build_linear

SCHEMES = ("ocdr", "tcdr", "static")


@dataclass
class Scenario:
    topology: Topology
    channel: ChannelParams
    qos: QosSpec
    weights: dict
    hyper: Hyperparams
    name: str = ""
    positions: dict = field(default_factory=dict)

    def with_positions(self, updates: dict) -> "Scenario":
        pos = dict(self.positions)
        pos.update(updates)
        top = build_linear(self.topology.K, self.topology.L, self.topology.M, pos)
        return dataclasses.replace(self, topology=top, positions=pos)

    def with_weights(self, weights: dict) -> "Scenario":
        return dataclasses.replace(self, weights=dict(weights))


@dataclass
class SweepSpec:
    scenario: Scenario
    kind: str
    schemes: tuple
    output: Path | None
    seed: int = 0
    grid: dict = field(default_factory=dict)       # label -> array of values
    count: int = 0
    low: float = 0.1
    high: float = 0.9
    ratios: tuple = ()


class _Source:
    """Parsed INI text plus a (section, key) -> line number map for messages."""

    def __init__(self, text: str, path: str):
        self.path = path
        self.lines = {}
        section = None
        for n, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line[0] in "#;":
                continue
            m = re.match(r"\[(.+)\]$", line)
            if m:
                section = m.group(1).strip()
                self.lines[(section, None)] = n
                continue
            if section is not None:
                key = re.split(r"[=:]", line, 1)[0].strip().lower()
                self.lines[(section, key)] = n
        cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        cp.optionxform = str
        try:
            cp.read_string(text, source=path)
        except configparser.Error as exc:
            raise ScenarioParseError(f"{path}: {exc}") from exc
        self.cp = cp

    def error(self, section: str, key: str | None, msg: str) -> ScenarioParseError:
        n = self.lines.get((section, key.lower() if key else None))
        where = f"{self.path}:{n}" if n else self.path
        what = f"[{section}] {key}" if key else f"[{section}]"
        return ScenarioParseError(f"{where}: {what}: {msg}")

    def has(self, section: str) -> bool:
        return self.cp.has_section(section)

    def items(self, section: str) -> list[tuple[str, str]]:
        return list(self.cp.items(section)) if self.cp.has_section(section) else []

    def get(self, section: str, key: str, conv=str, default=None, required=False):
        if not self.cp.has_option(section, key):
            if required:
                raise self.error(section, None, f"missing required key {key!r}")
            return default
        raw = self.cp.get(section, key)
        try:
            return conv(raw)
        except (TypeError, ValueError) as exc:
            raise self.error(section, key, f"bad value {raw!r} ({exc})") from exc


def _read(path) -> _Source:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read {p}: {exc}") from exc
    return _Source(text, str(p))


def parse_scenario_text(text: str, name: str = "<string>") -> Scenario:
    return _scenario(_Source(text, name), name)


def load_scenario(path) -> Scenario:
    src = _read(path)
    return _scenario(src, Path(path).stem)


def _scenario(src: _Source, name: str) -> Scenario:
    K = src.get("network", "K", int, required=True)
    L = src.get("network", "L", int, required=True)
    M = src.get("network", "M", int, required=True)
    if not src.has("positions"):
        raise src.error("positions", None, "section missing")
    positions = {}
    for key, _ in src.items("positions"):
        positions[key] = src.get("positions", key, float)
    try:
        top = build_linear(K, L, M, positions)
    except DynRouteError as exc:
        raise src.error("positions", None, str(exc)) from exc

    ch_kw = {}
    for key, conv in (("W", float), ("snr_scale", float), ("delta", float), ("slot", float)):
        v = src.get("channel", key, conv)
        if v is not None:
            ch_kw[key] = v
    try:
        channel = ChannelParams(**ch_kw)
    except DynRouteError as exc:
        raise src.error("channel", None, str(exc)) from exc

    qkw = {"default_deadline": src.get("qos", "deadline", float, 1e-4),
           "default_loss": src.get("qos", "loss", float, 1e-6)}
    per_d, per_l = {}, {}
    for key, _ in src.items("qos"):
        if "." not in key:
            if key not in ("deadline", "loss", "end_to_end_deadline", "end_to_end_loss"):
                raise src.error("qos", key, "unknown key")
            continue
        parts = key.split(".")
        if len(parts) != 3 or parts[0] not in ("deadline", "loss"):
            raise src.error("qos", key, "per-node keys look like deadline.<node>.<source>")
        try:
            node = top.node_by_label(parts[1])
            k = int(parts[2])
        except (DynRouteError, ValueError) as exc:
            raise src.error("qos", key, str(exc)) from exc
        (per_d if parts[0] == "deadline" else per_l)[(node, k)] = src.get("qos", key, float)
    qkw["end_to_end_deadline"] = src.get("qos", "end_to_end_deadline", float)
    qkw["end_to_end_loss"] = src.get("qos", "end_to_end_loss", float)
    try:
        qos = QosSpec(per_node_deadline=per_d, per_node_loss=per_l, **qkw)
    except DynRouteError as exc:
        raise src.error("qos", None, str(exc)) from exc

    weights = {k: 1.0 for k in range(1, K + 1)}
    for key, _ in src.items("weights"):
        m = re.fullmatch(r"f(\d+)", key)
        if not m or not 1 <= int(m.group(1)) <= K:
            raise src.error("weights", key, f"expected f1..f{K}")
        w = src.get("weights", key, float)
        if w < 0:
            raise src.error("weights", key, "weights must be >= 0")
        weights[int(m.group(1))] = w

    hyper = Hyperparams()
    names = {f.name: f for f in dataclasses.fields(Hyperparams)}
    hkw = {}
    for key, raw in src.items("control"):
        if key not in names:
            raise src.error("control", key, "unknown control parameter")
        typ = type(getattr(hyper, key))
        if typ is tuple:
            conv = lambda s: tuple(float(x) for x in s.split(",") if x.strip())  # noqa: E731
        else:
            conv = typ
        hkw[key] = src.get("control", key, conv)
    try:
        hyper = Hyperparams(**hkw)
    except ValueError as exc:
        raise src.error("control", None, str(exc)) from exc
    return Scenario(topology=top, channel=channel, qos=qos, weights=weights, hyper=hyper,
                    name=name, positions={top.label(n): p for n, p in top.positions.items()})


def _range(text: str) -> np.ndarray:
    parts = [float(x) for x in text.split(":")]
    if len(parts) == 1:
        return np.array(parts)
    if len(parts) != 3:
        raise ValueError("expected start:stop:step")
    a, b, s = parts
    if s <= 0:
        raise ValueError("step must be positive")
    if b < a:
        raise ValueError("empty range")
    n = int(round((b - a) / s))
    if abs(a + n * s - b) > 1e-9 * max(1.0, abs(b)):
        raise ValueError("step does not divide the range")
    return np.round(a + s * np.arange(n + 1), 10)


def load_sweep(path) -> SweepSpec:
    src = _read(path)
    base = Path(path).parent
    scen_path = src.get("sweep", "scenario", str, required=True)
    scenario = load_scenario(base / scen_path)
    kind = src.get("sweep", "kind", str, "positions")
    if kind not in ("positions", "weights"):
        raise src.error("sweep", "kind", f"unknown sweep kind {kind!r}")
    schemes = tuple(s.strip() for s in src.get("sweep", "schemes", str, ",".join(SCHEMES)).split(","))
    for s in schemes:
        if s not in SCHEMES:
            raise src.error("sweep", "schemes", f"unknown scheme {s!r}")
    out = src.get("sweep", "output", str)
    spec = SweepSpec(scenario=scenario, kind=kind, schemes=schemes,
                     output=(base / out) if out else None,
                     seed=src.get("sweep", "seed", int, 0))
    if kind == "positions":
        if not src.items("grid"):
            raise src.error("grid", None, "positions sweep needs a [grid] section")
        for key, _ in src.items("grid"):
            try:
                scenario.topology.node_by_label(key)
            except DynRouteError as exc:
                raise src.error("grid", key, str(exc)) from exc
            spec.grid[key] = src.get("grid", key, _range)
    else:
        spec.count = src.get("placements", "count", int, 100)
        spec.low = src.get("placements", "low", float, 0.1)
        spec.high = src.get("placements", "high", float, 0.9)
        ratios = src.get("placements", "ratios", lambda s: tuple(float(x) for x in s.split(",")),
                         required=True)
        if spec.count < 1 or not ratios or not spec.low < spec.high:
            raise src.error("placements", None, "need count >= 1, ratios, low < high")
        if scenario.topology.K != 2:
            raise src.error("sweep", "scenario", "weights sweeps need K = 2")
        spec.ratios = ratios
    return spec

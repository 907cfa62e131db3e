"""Command line: optimize, simulate, sweep, benchmark."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._backend import NAME as BACKEND
from .benchmark import best_static, static_network
from .errors import DynRouteError
from .network import Network
from .ocdr import build as build_ocdr, run_control_loop_ocdr
from .scenario import SCHEMES, Scenario, load_scenario, load_sweep
from .simulator import run_saturated, run_sim
from .sweep import run_sweep, write_csv
from .tcdr import build as build_tcdr, run_control_loop_td

log = logging.getLogger("dynroute")


def _mbps(x: float) -> str:
    return f"{x / 1e6:.6f} Mb/s" if x >= 1e3 else f"{x:.6g} bit/s"


def _apply_overrides(scenario: Scenario, args) -> None:
    h = scenario.hyper
    if getattr(args, "seed", None) is not None:
        h.seed = args.seed
    if getattr(args, "tol", None) is not None:
        h.tol = args.tol
    if getattr(args, "max_rounds", None) is not None:
        h.max_rounds = args.max_rounds


def optimize(scenario: Scenario, scheme: str):
    """Converge ``scheme`` on ``scenario``; returns (F, rho, network, converged)."""
    top, ch, qos, w = scenario.topology, scenario.channel, scenario.qos, scenario.weights
    if scheme == "static":
        assignment, res = best_static(top, ch, qos, w)
        net = static_network(top, ch, qos, w, assignment, res)
        settle(net)
        return res.F, res.rho, net, True
    fn = run_control_loop_ocdr if scheme == "ocdr" else run_control_loop_td
    rep, net = fn(top, ch, qos, w, scenario.hyper)
    return rep.F, rep.rho, net, rep.converged


def settle(net: Network, rounds: int = 50) -> None:
    """Let measured arrivals follow the flows until the limits stop moving."""
    prev = None
    for _ in range(rounds):
        r = net.evaluate(update_arrivals=True)
        if prev is not None and abs(r.F - prev) <= 1e-12 * max(abs(r.F), 1.0):
            break
        prev = r.F


def state_dict(net: Network, scheme: str, rho: dict, F: float) -> dict:
    lab = net.topology.label
    nodes = {}
    for i, a in net.agents.items():
        nodes[lab(i)] = {
            "links": [lab(j) for j in a.links],
            "pairs": [[lab(a.links[l]), k] for l, k in a.pairs],
            "beta": None if a.beta is None else [float(x) for x in a.beta],
            "alpha": [float(x) for x in a.alpha],
        }
    return {"scheme": scheme, "F": F, "rho": {str(k): float(v) for k, v in rho.items()},
            "nodes": nodes}


def network_from_state(scenario: Scenario, state: dict) -> tuple[Network, dict]:
    """Rebuild a converged network from ``state_dict`` output."""
    top, ch, qos, w = scenario.topology, scenario.channel, scenario.qos, scenario.weights
    scheme = state.get("scheme")
    if scheme == "static":
        assignment, res = best_static(top, ch, qos, w)
        net = static_network(top, ch, qos, w, assignment, res)
    elif scheme in ("ocdr", "tcdr"):
        net = (build_ocdr if scheme == "ocdr" else build_tcdr)(top, ch, qos, w)
        for label, entry in state["nodes"].items():
            try:
                a = net.agents[top.node_by_label(label)]
            except (KeyError, DynRouteError) as exc:
                raise DynRouteError(f"state does not match scenario: node {label}") from exc
            pairs = [[top.label(a.links[l]), k] for l, k in a.pairs]
            if pairs != entry["pairs"]:
                raise DynRouteError(f"state does not match scenario at node {label}")
            a.alpha = np.array(entry["alpha"], dtype=float)
            if a.beta is not None:
                a.beta = np.array(entry["beta"], dtype=float)
    else:
        raise DynRouteError(f"unknown scheme in state file: {scheme!r}")
    settle(net)
    rho = {int(k): float(v) for k, v in state["rho"].items()}
    return net, rho


def _print_tables(net: Network, out) -> None:
    for node, tab in net.tables().items():
        stars = ", ".join(f"k{k}: {_mbps(v)}" for k, v in sorted(tab["rho_star"].items()))
        print(f"  {node}  rho* {stars}", file=out)
        for row in tab["links"]:
            lim = "-" if row["rho_hat"] is None else _mbps(row["rho_hat"])
            print(f"    -> {row['next']:<4} k{row['source']}  mu_hat {_mbps(row['mu_hat'])}"
                  f"  limit {lim}", file=out)


def cmd_optimize(args) -> int:
    sc = load_scenario(args.scenario)
    _apply_overrides(sc, args)
    F, rho, net, conv = optimize(sc, args.scheme)
    print(f"scheme {args.scheme}  F = {_mbps(F)}  converged = {conv}")
    for k in sorted(rho):
        print(f"  rho_{k} = {_mbps(rho[k])}")
    if not args.quiet:
        _print_tables(net, sys.stdout)
    if args.state:
        Path(args.state).write_text(json.dumps(state_dict(net, args.scheme, rho, F), indent=1))
    return 0 if conv else 3


def cmd_simulate(args) -> int:
    sc = load_scenario(args.scenario)
    try:
        state = json.loads(Path(args.state).read_text())
    except (OSError, ValueError) as exc:
        raise DynRouteError(f"cannot read state {args.state}: {exc}") from exc
    net, rho = network_from_state(sc, state)
    if args.saturated:
        n = int(round(args.duration / sc.channel.slot))
        rates = run_saturated(net, n, args.seed)
        for (i, j, k), v in sorted(rates.items()):
            print(f"{sc.topology.label(i)} -> {sc.topology.label(j)} k{k}: {_mbps(v)}")
        return 0
    m = run_sim(net, rho, args.duration, args.seed, packet_bits=args.packet_bits,
                scheme=state["scheme"])
    row = m.row(sc.name)
    for k, v in row.items():
        print(f"{k}: {v}")
    if args.output:
        write_csv(args.output, list(row), [row])
    return 0


def cmd_sweep(args) -> int:
    spec = load_sweep(args.spec)
    if args.output is None and spec.output is None:
        raise DynRouteError("no output path: set [sweep] output or pass --output")
    cols, rows = run_sweep(spec, workers=args.workers, output=args.output)
    flagged = sum(1 for r in rows if r.get("flag"))
    print(f"{len(rows)} rows written to {args.output or spec.output}"
          + (f" ({flagged} flagged)" if flagged else ""))
    return 0


def cmd_benchmark(args) -> int:
    sc = load_scenario(args.scenario)
    assignment, res = best_static(sc.topology, sc.channel, sc.qos, sc.weights)
    print(f"best static assignment {assignment.describe(sc.topology.M)}")
    print(f"  F = {_mbps(res.F)}  (equal shares: {_mbps(res.F_equal)})")
    for k in sorted(res.rho):
        print(f"  rho_{k} = {_mbps(res.rho[k])}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dynroute", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({BACKEND})")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)

    o = sub.add_parser("optimize", help="converge one scheme on one scenario")
    o.add_argument("--scenario", required=True)
    o.add_argument("--scheme", choices=SCHEMES, default="ocdr")
    o.add_argument("--seed", type=int)
    o.add_argument("--tol", type=float)
    o.add_argument("--max-rounds", type=int)
    o.add_argument("--state", help="write the converged controller state (JSON) here")
    o.add_argument("-q", "--quiet", action="store_true", help="omit per-node tables")
    o.set_defaults(func=cmd_optimize)

    s = sub.add_parser("simulate", help="slot-level simulation of a saved controller state")
    s.add_argument("--scenario", required=True)
    s.add_argument("--state", required=True)
    s.add_argument("--duration", type=float, required=True, help="simulated seconds")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--packet-bits", type=float, default=1.0)
    s.add_argument("--saturated", action="store_true", help="backlogged buffers, report pair rates")
    s.add_argument("--output", help="CSV file for the metrics row")
    s.set_defaults(func=cmd_simulate)

    w = sub.add_parser("sweep", help="run a sweep spec and write its CSV")
    w.add_argument("--spec", required=True)
    w.add_argument("--output")
    w.add_argument("--workers", type=int, default=None)
    w.set_defaults(func=cmd_sweep)

    b = sub.add_parser("benchmark", help="best static relay assignment")
    b.add_argument("--scenario", required=True)
    b.set_defaults(func=cmd_benchmark)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except DynRouteError as exc:
        print(f"dynroute: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

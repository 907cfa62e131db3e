"""Experiment sweeps: relay-position grids and weight-ratio studies.

Points are independent and may run in a process pool; results are sorted by
their grid key before writing, and CSV files are written to a temporary file
and renamed, so output bytes never depend on scheduling.
"""
from __future__ import annotations

import csv
import itertools
import logging
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .benchmark import best_static
from .errors import DynRouteError
from .ocdr import run_control_loop_ocdr
from .scenario import Scenario, SweepSpec
from .tcdr import run_control_loop_td

log = logging.getLogger(__name__)

GAIN_PAIRS = (("ocdr", "static"), ("tcdr", "static"), ("ocdr", "tcdr"))


def gain(fa: float, fb: float) -> float:
    """Percentage gain of fa over fb; NaN when fb is not positive."""
    if not fb > 0 or math.isnan(fa):
        return math.nan
    return 100.0 * (fa - fb) / fb


def run_schemes(scenario: Scenario, schemes) -> dict:
    """F, per-source rates and convergence of each scheme at one scenario.

    Returns ``{scheme: {"F", "rho", "converged"}}`` plus, for static,
    ``"F_equal"``. Each scheme is seeded with the best static assignment.
    """
    top, ch, qos, w, hyper = (scenario.topology, scenario.channel, scenario.qos,
                              scenario.weights, scenario.hyper)
    out = {}
    warm = True
    if "static" in schemes or "ocdr" in schemes or "tcdr" in schemes:
        assignment, res = best_static(top, ch, qos, w)
        warm = assignment.edges(top)
        if "static" in schemes:
            out["static"] = {"F": res.F, "rho": res.rho, "converged": True,
                             "F_equal": res.F_equal, "assignment": assignment.describe(top.M)}
    if "ocdr" in schemes:
        rep, _ = run_control_loop_ocdr(top, ch, qos, w, hyper, warm_start=warm)
        out["ocdr"] = {"F": rep.F, "rho": rep.rho, "converged": rep.converged}
    if "tcdr" in schemes:
        rep, _ = run_control_loop_td(top, ch, qos, w, hyper, warm_start=warm)
        out["tcdr"] = {"F": rep.F, "rho": rep.rho, "converged": rep.converged}
    return out


def _columns(schemes, K, extra_keys):
    cols = list(extra_keys)
    for s in schemes:
        cols.append(f"F_{s}")
        cols += [f"rho{k}_{s}" for k in range(1, K + 1)]
        cols.append(f"converged_{s}")
        if s == "static":
            cols += ["F_static_equal", "static_assignment"]
    for a, b in GAIN_PAIRS:
        if a in schemes and b in schemes:
            cols.append(f"gain_{a}_vs_{b}")
    cols.append("flag")
    return cols


def _position_task(args):
    scenario, schemes, key, labels = args
    row = {lab: v for lab, v in zip(labels, key)}
    try:
        res = run_schemes(scenario.with_positions(dict(zip(labels, key))), schemes)
        flag = ";".join(f"nonconverged:{s}" for s in schemes if not res[s]["converged"])
    except DynRouteError as exc:
        res, flag = {}, f"error:{type(exc).__name__}:{exc}"
    K = scenario.topology.K
    for s in schemes:
        r = res.get(s)
        row[f"F_{s}"] = r["F"] if r else math.nan
        for k in range(1, K + 1):
            row[f"rho{k}_{s}"] = r["rho"].get(k, 0.0) if r else math.nan
        row[f"converged_{s}"] = int(r["converged"]) if r else 0
        if s == "static":
            row["F_static_equal"] = r["F_equal"] if r else math.nan
            row["static_assignment"] = r["assignment"] if r else ""
    for a, b in GAIN_PAIRS:
        if a in schemes and b in schemes:
            row[f"gain_{a}_vs_{b}"] = gain(row[f"F_{a}"], row[f"F_{b}"])
    row["flag"] = flag
    return key, row


def _map(fn, tasks, workers):
    if workers is None:
        workers = os.cpu_count() or 1
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, tasks, chunksize=1))


def sweep_relay_positions(spec: SweepSpec, workers: int | None = None) -> tuple[list, list]:
    """Run every grid point; returns (columns, rows sorted by grid key)."""
    labels = sorted(spec.grid)
    keys = list(itertools.product(*[[float(v) for v in spec.grid[l]] for l in labels]))
    tasks = [(spec.scenario, spec.schemes, key, labels) for key in keys]
    results = _map(_position_task, tasks, workers)
    rows = [row for _, row in sorted(results, key=lambda kr: kr[0])]
    for row in rows:
        if row["flag"]:
            log.warning("grid point %s flagged: %s", {l: row[l] for l in labels}, row["flag"])
    return _columns(spec.schemes, spec.scenario.topology.K, labels), rows


def random_placements(count: int, low: float, high: float, seed: int, L: int = 2, M: int = 2):
    """Relay positions for the weights study.

    Draws L*M positions uniformly in [low, high]; sorted, the closest M to
    the sources form hop 1, the next M hop 2, and so on.
    """
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        pos = np.sort(rng.uniform(low, high, L * M))
        out.append({f"R{r + 1}": float(p) for r, p in enumerate(pos)})
    return out


def _weights_task(args):
    """All weight ratios at one placement.

    Admitted rates at fixed controller parameters do not depend on the
    weights, so every ratio's converged solution is a candidate for every
    other ratio. Each ratio keeps the candidate with the largest weighted
    sum; this can only raise F, and it removes local-optimum noise from the
    rate-versus-weight curves.
    """
    scenario, schemes, placement_id, placement, ratios = args
    sc = scenario.with_positions(placement)
    runs = []
    for ratio in ratios:
        try:
            runs.append(run_schemes(sc.with_weights({1: 1.0, 2: ratio}), schemes))
        except DynRouteError as exc:
            log.warning("placement %d ratio %g failed: %s", placement_id, ratio, exc)
            runs.append(None)
    out = []
    for n, ratio in enumerate(ratios):
        if runs[n] is None:
            out.append(((ratio, placement_id), None, list(schemes), []))
            continue
        res, flags, pooled = {}, [], []
        for s in schemes:
            cands = [r[s] for r in runs if r is not None]
            best = max(cands, key=lambda c: c["rho"][1] + ratio * c["rho"][2])
            own = runs[n][s]
            if best["rho"][1] + ratio * best["rho"][2] <= \
                    (own["rho"][1] + ratio * own["rho"][2]) * (1 + 1e-12):
                best = own
            else:
                pooled.append(s)
            res[s] = best
            if not best["converged"]:
                flags.append(s)
        out.append(((ratio, placement_id), res, flags, pooled))
    return out


def sweep_weights(spec: SweepSpec, workers: int | None = None) -> tuple[list, list]:
    """Average per-source rates and normalised weighted sum per weight ratio."""
    sc = spec.scenario
    placements = random_placements(spec.count, spec.low, spec.high, spec.seed,
                                   sc.topology.L, sc.topology.M)
    ratios = tuple(float(r) for r in spec.ratios)
    tasks = [(sc, spec.schemes, n, p, ratios) for n, p in enumerate(placements)]
    results = sorted((item for chunk in _map(_weights_task, tasks, workers) for item in chunk),
                     key=lambda t: t[0])
    cols = ["ratio", "placements"]
    for s in spec.schemes:
        cols += [f"r1_{s}", f"r2_{s}", f"wsum_{s}", f"flagged_{s}", f"pooled_{s}"]
    rows = []
    for ratio in ratios:
        group = [(res, flags, pooled) for (r, _), res, flags, pooled in results if r == ratio]
        row = {"ratio": ratio, "placements": len(group)}
        for s in spec.schemes:
            ok = [res[s] for res, _, _ in group if res is not None]
            r1 = float(np.mean([x["rho"][1] for x in ok])) if ok else math.nan
            r2 = float(np.mean([x["rho"][2] for x in ok])) if ok else math.nan
            row[f"r1_{s}"] = r1
            row[f"r2_{s}"] = r2
            row[f"wsum_{s}"] = (r1 + ratio * r2) / (1.0 + ratio)
            row[f"flagged_{s}"] = sum(1 for _, f, _ in group if s in f)
            row[f"pooled_{s}"] = sum(1 for _, _, p in group if s in p)
        rows.append(row)
    return cols, rows


def format_value(v) -> str:
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "nan" if math.isnan(v) else repr(v)
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def write_csv(path, columns, rows) -> None:
    """Write atomically: a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for row in rows:
                w.writerow([format_value(row.get(c, "")) for c in columns])
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def run_sweep(spec: SweepSpec, workers: int | None = None, output=None):
    """Run a sweep spec and write its CSV; returns (columns, rows)."""
    if spec.kind == "positions":
        cols, rows = sweep_relay_positions(spec, workers)
    else:
        cols, rows = sweep_weights(spec, workers)
    out = output or spec.output
    if out is not None:
        write_csv(out, cols, rows)
    return cols, rows

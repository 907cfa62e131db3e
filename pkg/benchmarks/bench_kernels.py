"""Time the compiled kernels against their pure-Python twins.

    python benchmarks/bench_kernels.py [--repeat 3]

Each kernel is run on identical inputs under both backends; the table shows
the best wall time of ``--repeat`` runs and the speed-up.
"""
import argparse
import sys
import time

import numpy as np

from dynroute import _backend, simulator
from dynroute.cli import settle
from dynroute.ocdr import run_control_loop_ocdr
from dynroute.qos import QosSpec
from dynroute.topology import ChannelParams, build_linear


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def cases(net, rho):
    rng = np.random.default_rng(0)
    bs = 10 ** rng.uniform(-3, 3, 20_000)
    coeffs = rng.uniform(0.1, 3.0, 3)
    inter = rng.exponential(1.0, 1_000_000)
    serv = rng.exponential(0.8, 1_000_000)

    def make(k):
        def patched(f):
            def run():
                old = simulator.kernels
                simulator.kernels = k
                try:
                    f()
                finally:
                    simulator.kernels = old
            return run
        return {
            "exp_e1 x20000": lambda: [k.exp_e1(b) for b in bs],
            "opp_integrals x2000 (3 rivals)": lambda: [k.opp_integrals(b, coeffs) for b in bs[:2000]],
            "mm1_wait_exceed 1e6": lambda: k.mm1_wait_exceed(inter, serv, 3.0),
            "saturated_slots 2e4": patched(lambda: simulator.run_saturated(net, 20_000, 1)),
            "closed_loop_slots 2e4": patched(lambda: (settle(net), simulator.run_sim(
                net, rho, 200.0, seed=1))),
        }
    return make


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)
    backends = _backend.available()
    if "cython" not in backends:
        print("compiled kernels are not built; only the pure backend is available")
    top = build_linear(2, 1, 2, {"S1": 0.0, "S2": 0.2, "D1": 1.0, "D2": 0.8,
                                 "R1": 0.4, "R2": 0.6})
    ch = ChannelParams(W=1.0, slot=0.01)
    rep, net = run_control_loop_ocdr(top, ch, QosSpec(10.0, 1e-3), {1: 1.0, 2: 1.0})
    make = cases(net, rep.rho)
    table = {name: make(k) for name, k in backends.items()}
    names = list(next(iter(table.values())))
    print(f"{'kernel':<34}" + "".join(f"{b:>12}" for b in backends) + "   speed-up")
    for n in names:
        t = {b: _best(table[b][n], args.repeat) for b in backends}
        row = f"{n:<34}" + "".join(f"{t[b]:>11.4f}s" for b in backends)
        if "cython" in t:
            row += f"   {t['python'] / t['cython']:8.1f}x"
        print(row)
    return 0


if __name__ == "__main__":
    sys.exit(main())

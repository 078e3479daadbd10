"""Time the hot kernels under the numba and pure-numpy backends.

    python benchmarks/bench_kernels.py [--repeat 3] [--scale 1.0]

The numpy backend runs the policy, routing and series loops as plain Python,
so problem sizes are kept modest; ``--scale`` multiplies them.
"""

import argparse
import time

import numpy as np

from pcnsim import kernels
from pcnsim.core import validate_config
from pcnsim.generators import gen_uniform
from pcnsim.network import request_uniforms, synthetic_graph


def cases(scale):
    n = int(20_000 * scale)
    cfg = validate_config(B=1000, m=1000)
    amounts = gen_uniform(cfg, n, "full", seed=1).amounts
    ints = gen_uniform(validate_config(B=500, m=107), n, seed=2, integer=True).amounts.astype(np.int64)
    graph = synthetic_graph("random:200:6:0")
    u = request_uniforms(int(2000 * scale), 3, 10)

    def sim(k):
        graph.reset()
        return k.simulate(graph.indptr, graph.nbr, graph.eid, graph.node_a, graph.htlc_min,
                          graph.htlc_max.astype(np.float64), graph.htlc_lim, graph.B_e, graph.b_e,
                          graph.balances, u, kernels.POLICY_EXP, True, 10)

    return {
        f"run_policy exp n={n}": lambda k: k.run_policy(amounts, 1000.0, cfg.b, 0.0, kernels.POLICY_EXP),
        f"dp_count n={n} B=500": lambda k: k.dp_count(ints, 500, 0),
        f"dp_choices n={n // 4} B=500": lambda k: k.dp_choices(ints[: n // 4], 500, 0),
        f"series n={50 * n}": lambda k: k.series(50 * n),
        f"simulate requests={u.shape[0]}": sim,
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--scale", type=float, default=1.0)
    args = p.parse_args(argv)
    names = kernels.available_backends()
    backends = {n: kernels.backend(n) for n in names}
    print(f"{'kernel':<32}" + "".join(f"{n:>12}" for n in names) + ("     speedup" if len(names) > 1 else ""))
    for label, fn in cases(args.scale).items():
        times = []
        for n in names:
            fn(backends[n])  # warm-up, includes compilation
            best = min(_timed(fn, backends[n]) for _ in range(args.repeat))
            times.append(best)
        row = f"{label:<32}" + "".join(f"{t * 1e3:>10.2f}ms" for t in times)
        if len(times) > 1:
            row += f"{times[1] / times[0]:>11.1f}x"
        print(row)


def _timed(fn, k):
    t0 = time.perf_counter()
    fn(k)
    return time.perf_counter() - t0


if __name__ == "__main__":
    main()

"""Time the compiled RK4 kernel against the numpy fallback.

    python benchmarks/bench_kernels.py [--steps 20000] [--repeat 3]

Both kernels integrate the same closed loops; the script also reports the
largest trajectory difference between them.
"""

import argparse
import time

import numpy as np

from lurecons import AgentDynamics
from lurecons.edge import full_loop
from lurecons.graph import complete_graph, graph_matrices, random_connected_graph
from lurecons.kernels import available_backends, integrate_lure
from lurecons.sector import ChannelBank, SectorBounds

OSC = AgentDynamics([[0.0, 1.0], [-1.0, 0.0]], [[0.0], [1.0]])
K = np.array([[-2.3825, -20.68]])


def cases(rng):
    for N in (3, 8, 20):
        g = complete_graph(N) if N == 3 else random_connected_graph(rng, N, 0.3)
        mats = graph_matrices(g)
        bank = ChannelBank.saturation(g.edge_count, [2.0, 2.0], None, SectorBounds.uniform(0.3, 1.0, 2))
        yield f"oscillators N={N} M={g.edge_count}", full_loop(OSC, mats.incidence, K), bank, rng.normal(size=2 * N)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    backends = available_backends()
    if "cython" not in backends:
        print("compiled kernel not built; only the fallback is timed")
    print(f"{'case':<32}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}{'max diff':>12}")
    for label, loop, bank, x0 in cases(np.random.default_rng(0)):
        times, trajs = {}, {}
        for name in backends:
            best = np.inf
            for _ in range(args.repeat):
                t0 = time.perf_counter()
                traj, _ = integrate_lure(*loop, bank, x0, 1e-3, args.steps, backend=name)
                best = min(best, time.perf_counter() - t0)
            times[name], trajs[name] = best, traj
        row = f"{label:<32}" + "".join(f"{times[b]:>11.3f}s" for b in backends)
        if "cython" in times:
            diff = np.abs(trajs["cython"] - trajs["python"]).max()
            row += f"{times['python'] / times['cython']:>9.1f}x{diff:>12.1e}"
        print(row)


if __name__ == "__main__":
    main()

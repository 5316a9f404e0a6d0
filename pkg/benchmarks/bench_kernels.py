"""Compare the compiled and pure-Python kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Per-kernel timings come from calling both backend modules directly in one
process.  The end-to-end row runs one IMEX simulation in a subprocess per
backend, selecting the Python fallback with ``VIRODIFF_PURE_PYTHON=1``.
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from virodiff import kernels
from virodiff.mesh import Field, assemble_laplacian, build_grid
from virodiff.model import Parameters, lambda_builder
from virodiff.spectral import assemble_linearized

E2E = """
import time
from virodiff import kernels
from virodiff.mesh import build_grid
from virodiff.model import Parameters, State, lambda_builder
from virodiff.timestep import StepperConfig, simulate
g = build_grid(1, [1.0], [64], "neumann")
p = Parameters(lambda_builder("constant", g, value=10.0), 1e-5, 100, 0.1, 0.5, 5, 0.01, 0.01, 0.01)
t = time.perf_counter()
simulate(State(g, 600.0, 10.0, 100.0), p, StepperConfig(10.0, snapshot_every=10**9))
print(kernels.BACKEND, time.perf_counter() - t)
"""


def cases(rng):
    g2 = build_grid(2, [1.0, 1.0], [64, 64], "dirichlet")
    lap = assemble_laplacian(g2, 1.0).matrix
    spd = assemble_laplacian(g2, 1.0).shifted(1.0, -0.01).matrix
    x = rng.standard_normal(g2.n_nodes)
    n = 20000
    T, I, V, lam = rng.uniform(0, 100, (4, n))
    g1 = build_grid(1, [1.0], [100], "neumann")
    p = Parameters(lambda_builder("constant", g1, value=1.0), 0.3, 2.0, 1.0, 0.7, 1.3,
                   0.01, 0.01, 0.02)
    op = assemble_linearized(p, Field(g1, rng.uniform(0, 5, 100))).matrix
    return {
        "csr_matvec (4096 nodes)":
            lambda m: m.csr_matvec(lap.indptr, lap.indices, lap.data, x),
        "reaction (20000 nodes)":
            lambda m: m.reaction(lam, T, I, V, 1e-3, 20.0, 0.1, 0.5, 3.0),
        "pcg (4096 nodes)":
            lambda m: m.pcg(spd.indptr, spd.indices, spd.data, x, np.zeros_like(x), 1e-10, 5000),
        "power_iteration (200 unknowns)":
            lambda m: m.power_iteration(op.indptr, op.indices, op.data, 5.0, np.ones(200),
                                        1e-10, 50000),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="write results to this file")
    args = ap.parse_args(argv)
    backends = kernels.available_backends()
    rng = np.random.default_rng(0)
    rows = []
    print(f"{'kernel':32s}" + "".join(f"{b:>12s}" for b in backends) + f"{'speedup':>10s}")
    for name, fn in cases(rng).items():
        t = {}
        for b, mod in backends.items():
            fn(mod)  # warm-up
            t[b] = min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat))
        speed = t["python"] / t["cython"] if "cython" in t else float("nan")
        rows.append({"kernel": name, **{f"{b}_s": v for b, v in t.items()}, "speedup": speed})
        print(f"{name:32s}" + "".join(f"{t[b] * 1e3:10.3f}ms" for b in backends)
              + f"{speed:9.2f}x")
    e2e = {}
    for pure in (False, True):
        env = dict(os.environ)
        env.pop("VIRODIFF_PURE_PYTHON", None)
        if pure:
            env["VIRODIFF_PURE_PYTHON"] = "1"
        out = subprocess.run([sys.executable, "-c", E2E], env=env, capture_output=True,
                             text=True, check=True).stdout.split()
        e2e[out[0]] = float(out[1])
    print("simulate, 64 nodes, 5000 IMEX steps: "
          + ", ".join(f"{b} {v:.2f}s" for b, v in e2e.items()))
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"kernels": rows, "simulate_seconds": e2e}, fh, indent=2, sort_keys=True)


if __name__ == "__main__":
    main()

"""Time the compiled kernels against the pure-numpy fallback.

Each backend runs in its own interpreter because SKINLAB_DISABLE_NUMBA is read
at import time.  Usage: python benchmarks/bench_kernels.py [--repeat N] [--size S]
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def _best(fn, repeat):
    fn()  # warm-up (compilation, caches)
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def worker(repeat, size):
    from skinlab import _backend, kernels
    from skinlab import hyperbolic as hb
    from skinlab.convex import GeodesicLine
    from skinlab.dynamics import DirichletDomain
    from skinlab.groups import GroupSpec, critical_exponent, enumerate_orbit
    from skinlab.hyperbolic import I, Isometry
    from skinlab.measures import patterson_approx, skinning_measure, ss_ball_masses

    s = 1.25 ** 0.5
    lam = 1.5 + s
    G = GroupSpec("schottky", [Isometry(1.5, s, s, 1.5), Isometry(lam, 0, 0, 1 / lam)])
    T = enumerate_orbit(G, I, 12.0 + 2.0 * size)
    fit = critical_exponent(T)
    P = patterson_approx(T, fit.delta)
    D = DirichletDomain.from_table(T, 3.8)
    C = GeodesicLine(float(hb.theta_from_real(-1.0)), float(hb.theta_from_real(1.0)))
    W = skinning_measure(C, P).atoms[: 500 * size]
    rng = np.random.default_rng(0)
    F = hb.frame_flow(hb.frame_from_base_dir(np.full(20000 * size, 1j), rng.uniform(0, 2 * np.pi, 20000 * size)),
                      rng.uniform(0, D.cap - 1.0, 20000 * size))
    out = {
        "backend": _backend.backend_name(),
        "atoms": len(P),
        "fold_frames": _best(lambda: D.fold_frames(F), repeat),
        "ss_mass": _best(lambda: ss_ball_masses(W, 2.0, P), repeat),
        "congruence_lattice": _best(lambda: kernels.congruence_lattice(400 * size, 2), repeat),
    }
    print(json.dumps(out))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--size", type=int, default=1)
    ap.add_argument("--worker", action="store_true")
    args = ap.parse_args()
    if args.worker:
        worker(args.repeat, args.size)
        return
    rows = {}
    for flag in ("0", "1"):
        env = dict(os.environ, SKINLAB_DISABLE_NUMBA=flag)
        res = subprocess.run([sys.executable, __file__, "--worker", "--repeat", str(args.repeat), "--size", str(args.size)],
                             env=env, capture_output=True, text=True, check=True)
        r = json.loads(res.stdout.strip().splitlines()[-1])
        rows[r["backend"]] = r
    nb, npy = rows.get("numba"), rows["numpy"]
    print(f"{'kernel':<20}{'numpy [s]':>12}{'numba [s]':>12}{'speed-up':>10}")
    for k in ("fold_frames", "ss_mass", "congruence_lattice"):
        if nb is None:
            print(f"{k:<20}{npy[k]:>12.4f}{'n/a':>12}{'':>10}")
        else:
            print(f"{k:<20}{npy[k]:>12.4f}{nb[k]:>12.4f}{npy[k] / nb[k]:>10.1f}")


if __name__ == "__main__":
    main()

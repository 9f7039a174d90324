"""Numba vs numpy timings for the hot loops.

The backend is fixed at import time by PSPACE_DISABLE_JIT, so every backend
runs in its own child process. The parent compares timings and checks that
both paths produce the same numbers.

    python benchmarks/bench_kernels.py            # default sizes
    python benchmarks/bench_kernels.py --quick    # smaller problems
"""
import argparse
import json
import os
import subprocess
import sys
import tempfile
import time

import numpy as np


def _best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def child(args):
    from pspace import _accel
    from pspace.grid import build_grid
    from pspace.kernel import PotentialModel, build_kernel_block
    from pspace.propagator import Interaction
    from pspace.spectra import cardinal_matrix

    n_kernel = 64 if args.quick else 128
    n_prop = 128 if args.quick else 256
    l_prop = 8 if args.quick else 16
    rng = np.random.default_rng(7)

    cases = {}
    g = build_grid(n_kernel, 50.0, L=1.5)
    for name, model in (("kernel-hydrogen", PotentialModel.hydrogen()),
                        ("kernel-helium", PotentialModel.helium_sae())):
        first = time.perf_counter()
        build_kernel_block(g, 0, model)  # compile (numba) or warm caches
        first = time.perf_counter() - first
        t, blk = _best_of(lambda: [build_kernel_block(g, l, model).matrix for l in (0, 1, 2)],
                          args.repeat)
        cases[name] = dict(seconds=t, first_call=first, size=f"N={n_kernel}, l=0..2",
                           result=np.stack(blk))

    gp = build_grid(n_prop, 10.0)
    inter = Interaction(l_prop, gp)
    f = rng.standard_normal((l_prop + 1, n_prop)) + 1j * rng.standard_normal((l_prop + 1, n_prop))
    first = time.perf_counter()
    inter.apply(f, 0.5, 0.05)
    first = time.perf_counter() - first
    t, out = _best_of(lambda: [inter.apply(f, a, 0.05) for a in np.linspace(-0.9, 0.9, 50)][-1],
                      args.repeat)
    cases["interaction"] = dict(seconds=t, first_call=first,
                                size=f"N={n_prop}, l_max={l_prop}, 50 steps", result=out)

    gc = build_grid(512, 10.0)
    p = np.linspace(1e-3, 2.0, 4000)
    first = time.perf_counter()
    cardinal_matrix(gc, p[:10])
    first = time.perf_counter() - first
    t, M = _best_of(lambda: cardinal_matrix(gc, p), args.repeat)
    cases["cardinal"] = dict(seconds=t, first_call=first, size="N=512, 4000 points", result=M)

    np.savez(args.dump, **{k: v.pop("result") for k, v in cases.items()})
    json.dump({"backend": _accel.backend_name(), "cases": cases}, sys.stdout)


def run_backend(disable_jit, args, dump):
    env = dict(os.environ, PSPACE_DISABLE_JIT="1" if disable_jit else "0",
               NUMBA_NUM_THREADS=str(args.threads))
    cmd = [sys.executable, __file__, "--child", "--dump", dump, "--repeat", str(args.repeat)]
    if args.quick:
        cmd.append("--quick")
    res = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--quick", action="store_true")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    ap.add_argument("--dump", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.child:
        child(args)
        return

    with tempfile.TemporaryDirectory() as tmp:
        jit_dump, np_dump = os.path.join(tmp, "jit.npz"), os.path.join(tmp, "np.npz")
        jit = run_backend(False, args, jit_dump)
        ref = run_backend(True, args, np_dump)
        a, b = np.load(jit_dump), np.load(np_dump)
        print(f"{'case':<16}{'size':<30}{'numba s':>10}{'numpy s':>10}{'speedup':>9}"
              f"{'compile s':>11}{'max rel diff':>14}")
        for name, cj in jit["cases"].items():
            cn = ref["cases"][name]
            scale = max(np.abs(b[name]).max(), 1e-300)
            diff = np.abs(a[name] - b[name]).max() / scale
            print(f"{name:<16}{cj['size']:<30}{cj['seconds']:>10.4f}{cn['seconds']:>10.4f}"
                  f"{cn['seconds'] / cj['seconds']:>9.1f}{cj['first_call']:>11.2f}{diff:>14.2e}")


if __name__ == "__main__":
    main()

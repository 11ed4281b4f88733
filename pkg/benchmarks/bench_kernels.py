"""Compare the numba kernels against the pure-numpy fallback.

Each backend runs in its own interpreter because the choice is fixed at
import time by NECKFLOW_DISABLE_JIT.  The workload integrates one geodesic
through the waist of a warped product and one of a Morse model, then times
raw right-hand-side evaluations.  Final states from both backends must agree.

    python3 benchmarks/bench_kernels.py [--repeat 3]
"""
import argparse
import json
import os
import subprocess
import sys
import time

WORKLOAD = r"""
import json, math, sys, time
import numpy as np
from neckflow import _accel
from neckflow.flow import StopCondition, integrate
from neckflow.metric import MorseModel, WarpedProduct, unit_speed_state
from neckflow.scaling import PowerFamily
from neckflow import _kernels

repeat = int(sys.argv[1])
# (name, family, eps, start z, start eta, target z); the Morse geodesic leaves the
# waist vertically, as in the focussing experiment, and stays where w^2 S < 1
cases = [("warped", WarpedProduct(2, PowerFamily(2.0)), 0.02, -1.0, 0.95 * 0.02**2, 1.0),
         ("morse", MorseModel(2, 0.7, PowerFamily(2.0)), 0.05, 0.0, 0.0, 0.5)]
out = {"jit": _accel.JIT_ENABLED, "cases": {}}
for name, fam, eps, z0, eta0, zr in cases:
    st = unit_speed_state(fam, eps, z0, 0.3, eta0, True)
    t0 = time.perf_counter()
    tr = integrate(fam, eps, st, StopCondition(reach_z=zr), tol=1e-10)
    first = time.perf_counter() - t0
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        tr = integrate(fam, eps, st, StopCondition(reach_z=zr), tol=1e-10)
        best = min(best, time.perf_counter() - t0)
    out["cases"][name] = {"first": first, "best": best, "steps": len(tr.t),
                          "final": [float(v) for v in tr.states[-1]]}

# family 0 (S = c0 - c1 sin^2 y), physical time, p=2, k=2, kappa=2, eps=0.05
params = np.array([0.0, 0.0, 2.0, 2.0, 2.0, 0.05, 0.5, 0.49, 0.0])
x = np.array([0.1, 0.3, 0.5, 0.01, 0.0, 0.0])
n = 20000
_kernels.rhs(0.0, x, params)
t0 = time.perf_counter()
for _ in range(n):
    _kernels.rhs(0.0, x, params)
out["rhs_us"] = (time.perf_counter() - t0) / n * 1e6
print(json.dumps(out))
"""


def run_backend(disable, repeat):
    env = dict(os.environ)
    if disable:
        env["NECKFLOW_DISABLE_JIT"] = "1"
    else:
        env.pop("NECKFLOW_DISABLE_JIT", None)
    t0 = time.perf_counter()
    res = subprocess.run([sys.executable, "-c", WORKLOAD, str(repeat)], env=env,
                         capture_output=True, text=True)
    if res.returncode:
        sys.exit(res.stderr)
    data = json.loads(res.stdout.strip().splitlines()[-1])
    data["wall"] = time.perf_counter() - t0
    return data


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    jit = run_backend(False, args.repeat)
    ref = run_backend(True, args.repeat)
    print(f"{'case':<8} {'steps':>6} {'numba first':>12} {'numba best':>11} {'numpy best':>11} "
          f"{'speedup':>8} {'max |diff|':>11}")
    for name in jit["cases"]:
        a, b = jit["cases"][name], ref["cases"][name]
        diff = max(abs(u - v) for u, v in zip(a["final"], b["final"]))
        print(f"{name:<8} {a['steps']:>6} {a['first']:>11.3f}s {a['best']:>10.4f}s "
              f"{b['best']:>10.4f}s {b['best'] / a['best']:>7.1f}x {diff:>11.2e}")
    if jit.get("rhs_us") and ref.get("rhs_us"):
        print(f"rhs call: numba {jit['rhs_us']:.2f} us, numpy {ref['rhs_us']:.2f} us")
    print(f"process wall time: numba {jit['wall']:.1f}s, numpy {ref['wall']:.1f}s")


if __name__ == "__main__":
    main()

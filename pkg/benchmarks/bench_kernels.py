"""Compare the numba kernels against the pure-numpy fallback.

Each backend runs in its own interpreter because the choice is fixed at
import time by GHCONJ_DISABLE_NUMBA.

    python benchmarks/bench_kernels.py [--repeat 3]
"""
import argparse
import json
import os
import subprocess
import sys

WORKLOAD = r"""
import json, time
import numpy as np
from ghconj import BACKEND, HyperbolicLinearField, HyperbolicLinearMap, MapSystem, OdeSystem, Perturbation, rho
from ghconj.segments import rho_flow

sw = np.array([[0.0, 1.0], [1.0, 0.0]])
ode = OdeSystem(HyperbolicLinearField([[1.0]], [[-1.0]]), Perturbation.sine(0.05, sw))
gmap = MapSystem(HyperbolicLinearMap([[2.0]], [[0.5]]), Perturbation.sine(0.05, sw))
z = np.array([0.4, -0.3])

def best(fn, repeat):
    fn()  # warm-up (includes compilation for numba)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)

repeat = {repeat}
out = {{"backend": BACKEND}}
out["flow_1000_steps"] = best(lambda: ode.flow(z, 10.0), repeat)
out["flow_with_jacobian"] = best(lambda: ode.flow_with_jacobian(z, 10.0), repeat)
out["rho_flow"] = best(lambda: rho_flow(ode, z, 0.15), repeat)
out["rho_map"] = best(lambda: rho(gmap, z, 0.25), repeat)
print(json.dumps(out))
"""


def run(disable, repeat):
    env = dict(os.environ)
    if disable:
        env["GHCONJ_DISABLE_NUMBA"] = "1"
    else:
        env.pop("GHCONJ_DISABLE_NUMBA", None)
    res = subprocess.run([sys.executable, "-c", WORKLOAD.format(repeat=repeat)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    fast = run(False, args.repeat)
    slow = run(True, args.repeat)
    print(f"{'case':<22}{fast['backend']:>12}{slow['backend']:>12}{'speedup':>10}")
    for key in fast:
        if key == "backend":
            continue
        print(f"{key:<22}{fast[key]:>12.5f}{slow[key]:>12.5f}{slow[key] / fast[key]:>10.1f}")


if __name__ == "__main__":
    main()

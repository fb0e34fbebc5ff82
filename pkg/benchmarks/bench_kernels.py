"""Compare the numba and pure-numpy kernel backends.

Each backend runs in its own interpreter because THERMOHD_NUMBA is read at
import time. Usage: python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def child(repeat):
    from thermohd import _accel, kernels, scenarios
    from thermohd.integrators import integrate

    built = scenarios.build(scenarios.load_scenario("piston-forced"), {"method": "RK4Fixed", "dt": 1e-3, "t_end": 10.0})
    t0 = time.perf_counter()
    integrate(built.system, built.state0, built.config.replace(t_end=1e-2))
    warmup = time.perf_counter() - t0
    traj = integrate(built.system, built.state0, built.config, observe=False)
    piston = _best(lambda: integrate(built.system, built.state0, built.config, observe=False), repeat)

    rng = np.random.default_rng(0)
    K = 8
    mu = rng.normal(size=K)
    G = rng.uniform(0, 1, (K, K))
    G = G + G.T
    flux, dN = np.zeros((K, K)), np.zeros(K)
    kernels.transfer_exchange(mu, G, flux, dN)

    def exchange():
        for _ in range(20_000):
            kernels.transfer_exchange(mu, G, flux, dN)

    transfer = _best(exchange, repeat)
    adaptive = _best(lambda: scenarios.run("piston", skip_expensive=True), repeat)
    return {
        "backend": _accel.backend(),
        "warmup_s": warmup,
        "piston_rk4_10k_steps_s": piston,
        "transfer_exchange_20k_calls_s": transfer,
        "piston_adaptive_run_s": adaptive,
        "final_state": traj.y[-1].tolist(),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.child:
        print(json.dumps(child(args.repeat)))
        return

    results = {}
    for flag in ("1", "0"):
        env = dict(os.environ, THERMOHD_NUMBA=flag)
        out = subprocess.run([sys.executable, __file__, "--child", "--repeat", str(args.repeat)],
                             env=env, check=True, capture_output=True, text=True).stdout
        res = json.loads(out.strip().splitlines()[-1])
        results[res["backend"]] = res

    keys = ["warmup_s", "piston_rk4_10k_steps_s", "transfer_exchange_20k_calls_s", "piston_adaptive_run_s"]
    print(f"{'case':32s} {'numba':>10s} {'python':>10s} {'speedup':>8s}")
    for k in keys:
        a, b = results["numba"][k], results["python"][k]
        print(f"{k:32s} {a:10.4f} {b:10.4f} {b / a:8.1f}")
    diff = np.max(np.abs(np.subtract(results["numba"]["final_state"], results["python"]["final_state"])))
    print(f"max |final state difference| between backends: {diff:.3e}")


if __name__ == "__main__":
    main()

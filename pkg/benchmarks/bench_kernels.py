"""Compare the numba kernels with the pure-numpy fallback.

Each mode runs in its own interpreter because ``SLS_NO_JIT`` is read at import.

    python3 benchmarks/bench_kernels.py [--n 200] [--m 200] [--repeat 5]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from slscreen import (USING_NUMBA, LossConvention, ProblemSpec, SyntheticConfig, gen_synthetic,
                      perspective_penalty_prox, solve_relaxation, solve_bnb)

n, m, repeat = map(int, sys.argv[1:4])
d = gen_synthetic(SyntheticConfig(n=n, m=m, k=max(1, n // 10), s=100.0, seed=1))
conv = LossConvention.NORMALIZED
reg = ProblemSpec.reg(1.0 / m, m * 1e-3, conv)
card = ProblemSpec.card(1.0 / m, max(1, n // 10), conv)
small = gen_synthetic(SyntheticConfig(n=12, m=40, k=3, s=5.0, seed=2))
v = np.random.default_rng(0).standard_normal(200_000)

cases = {
    "prox_200k": lambda: perspective_penalty_prox(v, 0.5, 1.0, 0.1),
    "relax_reg": lambda: solve_relaxation(d, reg),
    "relax_card": lambda: solve_relaxation(d, card),
    "bnb_small": lambda: solve_bnb(small, ProblemSpec.reg(1.0, 0.5)),
}
out = {"numba": USING_NUMBA, "first_call": {}, "best": {}}
for name, fn in cases.items():
    t = time.perf_counter(); fn(); out["first_call"][name] = time.perf_counter() - t
    times = []
    for _ in range(repeat):
        t = time.perf_counter(); fn(); times.append(time.perf_counter() - t)
    out["best"][name] = min(times)
print(json.dumps(out))
"""


def run(no_jit, args):
    env = {**os.environ, "SLS_NO_JIT": "1" if no_jit else "0"}
    res = subprocess.run([sys.executable, "-c", WORKER, str(args.n), str(args.m), str(args.repeat)],
                         env=env, check=True, capture_output=True, text=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--m", type=int, default=200)
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args()

    jit, plain = run(False, args), run(True, args)
    if not jit["numba"]:
        print("numba is not importable; both columns use the numpy path")
    print(f"{'kernel':<12} {'numba s':>10} {'numpy s':>10} {'speed-up':>9} {'first call (jit) s':>19}")
    for name in jit["best"]:
        a, b = jit["best"][name], plain["best"][name]
        print(f"{name:<12} {a:>10.4f} {b:>10.4f} {b / a:>9.1f} {jit['first_call'][name]:>19.3f}")


if __name__ == "__main__":
    main()

"""Compare the compiled kernels with the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Each backend runs in its own interpreter because the choice is made once at
import time (``TRAINTRACK_PURE=1`` forces the fallback).
"""
import argparse
import json
import os
import subprocess
import sys

WORKLOAD = r"""
import json, random, time
from traintrack import kernels
from traintrack.words import Alphabet, Endomorphism
from traintrack.maps import rose_representative, power
from traintrack.moves import train_track_algorithm

rng = random.Random(7)
words = [tuple(rng.choice((1, -1, 2, -2, 3, -3)) for _ in range(400)) for _ in range(2000)]
wrapped = [kernels.free_reduce(w[:100] + kernels.free_reduce(w[100:]) + tuple(-x for x in reversed(w[:100]))) for w in words]
table = [(), (1, 2), (2, 3, -1), (3, 1, 1)]
A = Alphabet(2, ("a", "b"))
fib = Endomorphism.from_strings(A, {"a": "b", "b": "a b"})
times = {}

def clock(name, fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    times[name] = best

R = %d
clock("free_reduce", lambda: [kernels.free_reduce(w) for w in words], R)
clock("cyclic_reduce", lambda: [kernels.cyclic_reduce(w) for w in wrapped], R)
clock("substitute", lambda: [kernels.substitute(w[:60], table) for w in words[:300]], R)
clock("power_fib_20", lambda: power(rose_representative(fib), 20), R)
clock("train_track_fib", lambda: train_track_algorithm(fib), R)
print(json.dumps({"backend": kernels.BACKEND, "times": times}))
"""


def run(pure: bool, repeat: int) -> dict:
    env = dict(os.environ)
    env.pop("TRAINTRACK_PURE", None)
    if pure:
        env["TRAINTRACK_PURE"] = "1"
    out = subprocess.run([sys.executable, "-c", WORKLOAD % repeat], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    fast = run(False, args.repeat)
    slow = run(True, args.repeat)
    if fast["backend"] != "cython":
        print("compiled kernels not built; both columns use the fallback")
    print(f"{'kernel':<18}{fast['backend']:>12}{'python':>12}{'speedup':>10}")
    for name, t in fast["times"].items():
        s = slow["times"][name]
        print(f"{name:<18}{t * 1e3:>10.2f}ms{s * 1e3:>10.2f}ms{s / t:>9.1f}x")


if __name__ == "__main__":
    main()

"""Compare the compiled and pure-numpy kernel backends.

Micro-benchmarks the three per-step kernels against both implementations
in-process, then times a full replication under each backend in a
subprocess (backend selection happens at import).

Usage: python benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np


def bench_kernels(repeats: int) -> None:
    from linens import _kernels_py as pure

    try:
        from linens import _kernels as compiled
    except ImportError:
        compiled = None
        print("compiled extension not available; showing pure backend only")

    rng = np.random.default_rng(0)
    dim, models = 8, 64
    x = np.ascontiguousarray(rng.standard_normal(dim) / 4.0)
    yz = np.ascontiguousarray(rng.standard_normal(models))

    backends = [("pure", pure)] + ([("compiled", compiled)] if compiled else [])
    print(f"{'kernel':<22}{'backend':<10}{'us/call':>10}")
    for kernel in ("rank1_update", "quad_form", "accumulate_perturbed"):
        times = {}
        for name, mod in backends:
            gram = np.eye(dim) + 0.0
            inv = np.eye(dim) + 0.0
            s = np.zeros((models, dim))
            fn = getattr(mod, kernel)
            if kernel == "rank1_update":
                call = lambda: fn(gram, inv, x)
            elif kernel == "quad_form":
                call = lambda: fn(inv, x)
            else:
                call = lambda: fn(s, x, yz)
            per = min(timeit.repeat(call, number=repeats, repeat=5)) / repeats
            times[name] = per
            print(f"{kernel:<22}{name:<10}{per * 1e6:>10.2f}")
        if compiled:
            print(f"{'':<22}{'speedup':<10}{times['pure'] / times['compiled']:>9.1f}x")


REPLICATION_SNIPPET = """
import time
from linens.config import ExperimentConfig
from linens.harness import run_replication
import linens

cfg = ExperimentConfig()
cfg.env.dim = 3
cfg.env.arm_count = 10
cfg.env.sigma = 0.5
cfg.policy.delta = 0.2
cfg.policy.m = 32
cfg.run.horizon = 2000
cfg.validate()
run_replication(cfg, 0)  # warm up
start = time.perf_counter()
for rep in range(5):
    run_replication(cfg, rep)
elapsed = (time.perf_counter() - start) / 5
backend = "compiled" if linens.HAVE_COMPILED_KERNELS else "pure"
print(f"full replication (T=2000, m=32, d=3)  {backend:<10}{elapsed * 1e3:>8.1f} ms")
"""


def bench_replication() -> None:
    for force_pure in (False, True):
        env = dict(os.environ)
        if force_pure:
            env["LINENS_FORCE_PURE"] = "1"
        else:
            env.pop("LINENS_FORCE_PURE", None)
        out = subprocess.run(
            [sys.executable, "-c", REPLICATION_SNIPPET],
            env=env,
            capture_output=True,
            text=True,
            check=True,
        )
        print(out.stdout, end="")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=20_000)
    args = parser.parse_args()
    bench_kernels(args.repeats)
    print()
    bench_replication()


if __name__ == "__main__":
    main()

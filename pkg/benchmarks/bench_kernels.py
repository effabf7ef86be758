#!/usr/bin/env python3
"""Time the numba kernels against their numpy twins.

Numba variants are called once before timing so compilation is excluded.
Each row also checks that both variants agree on the benchmark input.

    python benchmarks/bench_kernels.py [--repeat 5] [--json out.json]
"""

import argparse
import json
import timeit

import numpy as np

from multiplicity_lab import kernels


def cases(rng):
    circle = np.column_stack([np.cos(np.linspace(0, 2 * np.pi, 720, endpoint=False)),
                              np.sin(np.linspace(0, 2 * np.pi, 720, endpoint=False))])
    queries = rng.normal(size=(4000, 2))
    cloud = rng.normal(size=(3000, 2))
    lattice = rng.uniform(-1, 1, size=(2000, 2))
    phi = rng.uniform(0, 0.1, size=720)
    u = rng.normal(size=200_001)
    return {
        "min_sqdist 4000x720": ("min_sqdist", (queries, circle)),
        "cluster_labels 3000 pts": ("cluster_labels", (cloud, 0.05)),
        "lattice_screen 2000x720": ("lattice_screen", (lattice, circle, phi, circle, 1e-3)),
        "stiffness_apply n=2e5": ("stiffness_apply", (u,)),
        "dirichlet_energy n=2e5": ("dirichlet_energy", (u, 1.0 / 200_002)),
    }


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.allclose(a, b, rtol=1e-12, atol=1e-12)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json", default=None)
    args = ap.parse_args(argv)
    if not kernels.HAS_NUMBA:
        print("numba is not installed; nothing to compare")
        return 0

    rng = np.random.default_rng(args.seed)
    rows = []
    print(f"{'kernel':28s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}  agree")
    for label, (name, inputs) in cases(rng).items():
        f_np = getattr(kernels, f"{name}_numpy")
        f_nb = getattr(kernels, f"{name}_numba")
        agree = same(f_np(*inputs), f_nb(*inputs))  # also warms up the jit
        t_np = min(timeit.repeat(lambda: f_np(*inputs), number=1, repeat=args.repeat)) * 1e3
        t_nb = min(timeit.repeat(lambda: f_nb(*inputs), number=1, repeat=args.repeat)) * 1e3
        rows.append({"kernel": label, "numpy_ms": t_np, "numba_ms": t_nb, "speedup": t_np / t_nb, "agree": bool(agree)})
        print(f"{label:28s} {t_np:10.3f} {t_nb:10.3f} {t_np / t_nb:8.2f}  {agree}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=1)
    return 0 if all(r["agree"] for r in rows) else 1


if __name__ == "__main__":
    raise SystemExit(main())

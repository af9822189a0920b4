"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from isacdp import kernels


def workloads(rng):
    n = 10
    symbols = rng.integers(0, 4, size=(256, n))
    seqs = np.array(np.unravel_index(np.arange(2 ** n), (2,) * n)).T
    table = rng.dirichlet(np.ones(2), size=4)
    weights = rng.dirichlet(np.ones(256))
    words = rng.integers(0, 2, size=(64, n))
    p_uy = rng.dirichlet(np.ones(4)).reshape(2, 2)
    src = rng.dirichlet(np.ones(3))
    dist = 1 - np.eye(3)
    return {
        "sequence_likelihoods": lambda m: m.sequence_likelihoods(symbols, seqs, table),
        "mixture_output": lambda m: m.mixture_output(weights, symbols, seqs, table),
        "joint_type_deviations": lambda m: m.joint_type_deviations(words, seqs, p_uy),
        "blahut_arimoto": lambda m: m.blahut_arimoto(src, dist, 2.0),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    impls = kernels.backends()
    if "cython" not in impls:
        print("compiled extension not built; timing the numpy fallback only")
    jobs = workloads(np.random.default_rng(0))
    names = sorted(impls)
    print(f"{'kernel':24s}" + "".join(f"{n:>12s}" for n in names) + ("     speedup" if len(names) > 1 else ""))
    for label, job in jobs.items():
        times = {}
        for name in names:
            mod = impls[name]
            job(mod)
            times[name] = min(timeit.repeat(lambda: job(mod), number=3, repeat=args.repeat)) / 3
        row = f"{label:24s}" + "".join(f"{times[n] * 1e3:10.3f}ms" for n in names)
        if len(names) > 1:
            row += f"{times['numpy'] / times['cython']:11.1f}x"
        print(row)


if __name__ == "__main__":
    main()

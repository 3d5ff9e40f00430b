#!/usr/bin/env python3
"""Compare the compiled and pure-python solver backends.

Times the two kernels on the shapes the benchmark harness actually hits
(per-column quantile fits and composite fits with nine levels), checks
that both backends agree on the solutions, and reports the speedups.

Run:  python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from pfqr import _ipqr_py as py_kernels

try:
    from pfqr import _ipqr as cy_kernels
except ImportError:
    cy_kernels = None


def _time(fn, repeats):
    # one warm-up call, then a best-of-3 median over `repeats` batches
    fn()
    best = []
    for _ in range(3):
        t0 = time.perf_counter()
        for _ in range(repeats):
            fn()
        best.append((time.perf_counter() - t0) / repeats)
    return min(best)


def bench_qr(rng, n, d, repeats):
    A = np.column_stack([np.ones(n), rng.normal(size=(n, d - 1))])
    y = A @ rng.normal(size=d) + rng.standard_t(3, size=n)
    tau = 0.5
    rows = []
    ref = None
    for name, mod in backends():
        coef, it, gap, conv = mod.qr_ip(A, y, tau)
        assert conv, f"{name} backend did not converge"
        if ref is None:
            ref = coef
        else:
            assert np.max(np.abs(coef - ref)) < 1e-7, "backend disagreement"
        rows.append((name, _time(lambda m=mod: m.qr_ip(A, y, tau), repeats), it))
    return rows


def bench_cqr(rng, n, dx, levels, repeats):
    X = rng.normal(size=(n, dx))
    y = X @ rng.normal(size=dx) + rng.standard_normal(n)
    rows = []
    ref = None
    for name, mod in backends():
        al, th, it, gap, conv = mod.cqr_ip(X, y, levels)
        assert conv, f"{name} backend did not converge"
        sol = np.concatenate([al, th])
        if ref is None:
            ref = sol
        else:
            assert np.max(np.abs(sol - ref)) < 1e-6, "backend disagreement"
        rows.append((name, _time(lambda m=mod: m.cqr_ip(X, y, levels), repeats), it))
    return rows


def backends():
    out = [("python", py_kernels)]
    if cy_kernels is not None:
        out.append(("compiled", cy_kernels))
    return out


def main():
    rng = np.random.default_rng(0)
    levels = np.arange(1, 10) / 10.0
    print(f"{'kernel':<28} {'backend':<9} {'ms/solve':>9} {'iters':>6}")
    cases = [
        ("qr  n=100 d=2", lambda: bench_qr(rng, 100, 2, 50)),
        ("qr  n=500 d=2", lambda: bench_qr(rng, 500, 2, 50)),
        ("qr  n=500 d=6", lambda: bench_qr(rng, 500, 6, 50)),
        ("cqr n=100 dx=1 L=9", lambda: bench_cqr(rng, 100, 1, levels, 20)),
        ("cqr n=500 dx=1 L=9", lambda: bench_cqr(rng, 500, 1, levels, 10)),
        ("cqr n=500 dx=4 L=9", lambda: bench_cqr(rng, 500, 4, levels, 10)),
    ]
    for label, runner in cases:
        rows = runner()
        base = None
        for name, sec, iters in rows:
            ms = sec * 1e3
            note = ""
            if name == "python":
                base = sec
            elif base:
                note = f"  ({base / sec:.1f}x faster)"
            print(f"{label:<28} {name:<9} {ms:>9.3f} {iters:>6}{note}")
    if cy_kernels is None:
        print("\ncompiled backend not built; showing python fallback only")


if __name__ == "__main__":
    main()

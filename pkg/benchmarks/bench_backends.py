"""Compare the compiled scan kernel against the numpy fallback.

Run:  python benchmarks/bench_backends.py
"""

import time

import numpy as np

from shelab._backend import available_backends
from shelab.grids import DomainKind, DomainSetup, Grid1D, TimeGrid
from shelab.noise import sample_noise, simulate_convolution


def time_call(fn, *args, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_scan(mod, steps, nmodes, complex_modes=True):
    rng = np.random.default_rng(0)
    decay = np.exp(-rng.uniform(0, 3, nmodes))
    gain = rng.uniform(0.5, 1.0, nmodes)
    if complex_modes:
        z = rng.standard_normal((steps, nmodes)) \
            + 1j * rng.standard_normal((steps, nmodes))
    else:
        z = rng.standard_normal((steps, nmodes))
    out = np.zeros((steps + 1, nmodes), dtype=z.dtype)
    return time_call(mod.ou_scan, decay, gain, z, out)


def bench_convolution(steps, nspace):
    grid = Grid1D(DomainSetup(DomainKind.PERIODIC_UNIT), nspace)
    tgrid = TimeGrid(steps, 1.0)
    noise = sample_noise(grid, tgrid, 1, 0)
    return time_call(simulate_convolution, noise)


def main():
    backends = available_backends()
    print(f"backends available: {', '.join(backends)}")
    print(f"{'scan (steps x modes)':>28} " + " ".join(f"{n:>12}" for n in backends))
    for steps, nmodes in ((256, 129), (1024, 257), (4096, 513)):
        row = [bench_scan(mod, steps, nmodes) for mod in backends.values()]
        cells = " ".join(f"{t * 1e3:>10.3f}ms" for t in row)
        speedup = row[0] / row[-1] if len(row) > 1 else 1.0
        print(f"{f'{steps} x {nmodes}':>28} {cells}  ({speedup:.1f}x)")
    print()
    print("end-to-end stochastic convolution (active backend):")
    for steps, nspace in ((256, 256), (1024, 512)):
        t = bench_convolution(steps, nspace)
        print(f"  {steps} x {nspace}: {t * 1e3:.2f} ms")


if __name__ == "__main__":
    main()

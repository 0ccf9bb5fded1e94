"""Compare the compiled kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--n 128] [--repeat 5]
"""

import argparse
import time

import numpy as np

from curvedqw import _kernels
from curvedqw.coins import compile_coins, flat_taus, targets_from_deformation
from curvedqw.geometry import ConformalMetric
from curvedqw.lattice import BravaisGrid, TriangularGrid, honeycomb_directions
from curvedqw.triangular import edge_coins


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=128, help="Bravais grid size")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _kernels.compiled is None:
        print("compiled kernels not available; only the numpy fallback can be timed")
    backends = {"python": _kernels.python}
    if _kernels.compiled is not None:
        backends["cython"] = _kernels.compiled

    n = args.n
    dirs = honeycomb_directions()
    metric = ConformalMetric("1+0.3*sin(x)*sin(y)")
    grid = BravaisGrid(n, n, 0.1, dirs)
    coins = compile_coins(metric, grid)
    tgrid = TriangularGrid(n // 2, n // 2, 0.1)
    ec = edge_coins(compile_coins(metric, tgrid))
    offsets = tuple(tgrid.neighbors.down_source_offset(k) for k in range(3))
    rng = np.random.default_rng(0)
    psi = rng.standard_normal((2, n, n)) + 1j * rng.standard_normal((2, n, n))
    epsi = rng.standard_normal((2, 3, n // 2, n // 2)) + 0j
    pos = grid.positions()
    e = metric.tetrad_field(0.0, pos[..., 0], pos[..., 1])
    targets = np.ascontiguousarray(
        targets_from_deformation(e[..., 1:, :] / e[..., 0, 0][..., None, None]).reshape(-1, 2, 3)
    )
    u = np.ascontiguousarray(dirs.vectors)

    print(f"grid {n}x{n}, best of {args.repeat}")
    print(f"{'kernel':<16}" + "".join(f"{b:>12}" for b in backends) + "     speedup")
    rows = {
        "honeycomb step": lambda k: [
            k.bravais_factor(psi, coins.U[i], coins.gamma[i], 0.1, *dirs.steps[i]) for i in range(3)
        ],
        "triangle step": lambda k: [
            k.tri_substep(epsi, ec.Usrc, ec.Utgt, ec.gamma, 0.1, offsets) for _ in range(3)
        ],
        "coin sweep": lambda k: k.newton_sweep(
            targets, u, flat_taus().n, np.empty((targets.shape[0], 3, 3))
        ),
    }
    for name, fn in rows.items():
        t = {b: best_of(lambda: fn(k), args.repeat) for b, k in backends.items()}
        line = f"{name:<16}" + "".join(f"{v * 1e3:>10.2f}ms" for v in t.values())
        if "cython" in t:
            line += f"  {t['python'] / t['cython']:>8.1f}x"
        print(line)


if __name__ == "__main__":
    main()

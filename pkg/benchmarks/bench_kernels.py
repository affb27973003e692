"""Time the compiled and pure-Python kernel backends on the hot paths.

    python3 benchmarks/bench_kernels.py [--quick]
"""
import argparse
import timeit

import numpy as np

from simplexshot import _backend
from simplexshot.data import generate_synthetic
from simplexshot.solver import SolverConfig, init_model, solve


def _cases(quick):
    sizes = [(200, 3, 16)] if quick else [(200, 3, 16), (500, 3, 64), (2000, 3, 640)]
    for n, k, dim in sizes:
        X, _ = generate_synthetic(k, n, dim, 0.05, 10.0, 1.0, seed=0)
        D, V = init_model(X, k, seed=0)
        yield f"w_descent N={n} K={k} dim={dim}", \
            lambda m, X=X, D=D, V=V: m.w_descent(V.copy(), D, X, 0.9, 0.1, 20, 20)

    rng = np.random.default_rng(0)
    for n_q, dim in ([(75, 64)] if quick else [(75, 64), (75, 640)]):
        Q = rng.normal(size=(3 * n_q, dim))
        offsets = np.arange(0, 3 * n_q + 1, 3, dtype=np.intp)
        S = rng.normal(size=(15, dim))
        yield f"pair_argmin queries={n_q} dim={dim}", \
            lambda m, Q=Q, o=offsets, S=S: m.pair_argmin(Q, o, S)

    X, _ = generate_synthetic(3, 500, 16, 0.0, 10.0, 1.0, seed=1)
    cfg = SolverConfig(lam=0.001, outer_iters=50 if quick else 500, w_steps_per_outer=10)

    def end_to_end(m, X=X, cfg=cfg):
        saved = _backend.kernels
        _backend.kernels = m
        try:
            solve(X, 3, cfg)
        finally:
            _backend.kernels = saved
    yield f"solve N=500 K=3 outer={cfg.outer_iters}", end_to_end


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--quick", action="store_true", help="small sizes, few repeats")
    args = parser.parse_args(argv)
    names = _backend.available()
    modules = {name: _backend.get(name) for name in names}
    repeat = 3 if args.quick else 5
    print(f"{'case':42s}" + "".join(f"{n:>12s}" for n in names) + ("     speedup" if len(names) > 1 else ""))
    rows = []
    for label, fn in _cases(args.quick):
        times = {}
        for name, module in modules.items():
            timer = timeit.Timer(lambda: fn(module))
            number, _ = timer.autorange()
            times[name] = min(timer.repeat(repeat, number)) / number
        line = f"{label:42s}" + "".join(f"{times[n] * 1e3:10.3f}ms" for n in names)
        if len(names) > 1:
            line += f"{times['python'] / times['compiled']:11.1f}x"
        print(line)
        rows.append((label, times))
    return rows


if __name__ == "__main__":
    main()

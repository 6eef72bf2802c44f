"""Time the tape backends against each other on the leaf growth model.

Usage: python3 benchmarks/bench_tape.py [--rows N] [--repeats K]

Prints the numba cold (first call, includes JIT) and warm timings, the
numpy fallback timing, and the largest relative deviation between the
two backends over the whole batch.
"""

import argparse
import json
import pathlib
import time

import numpy as np

from grfnkit import fortran, tape
from grfnkit.grfn import lower
from grfnkit.sensitivity import Bounds

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def build_batch(rows: int, seed: int):
    text = (FIXTURES / "lais.f").read_text(encoding="utf-8")
    network = lower(fortran.parse_source(text, path="lais.f").container("LAIS"))
    program = tape.compile_tape(network, "DLAI")

    bounds = Bounds.from_json_dict(
        json.loads((FIXTURES / "lais_bounds.json").read_text()))
    rng = np.random.default_rng(seed)
    X = np.empty((rows, len(program.columns)))
    for j, name in enumerate(program.columns):
        lo, hi = bounds.get(name)
        X[:, j] = rng.uniform(lo, hi, rows)
    return program, X


def best_of(fn, repeats: int) -> float:
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--rows", type=int, default=200_000)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--seed", type=int, default=42)
    args = parser.parse_args(argv)

    program, X = build_batch(args.rows, args.seed)
    print(f"rows={args.rows} tape_len={program.code.shape[0]} "
          f"columns={','.join(program.columns)}")

    t_numpy = best_of(lambda: tape.run_tape(program, X, backend="numpy"),
                      args.repeats)
    vals_numpy, flags = tape.run_tape(program, X, backend="numpy")
    print(f"numpy       {t_numpy * 1e3:9.2f} ms   "
          f"({args.rows / t_numpy / 1e6:.1f} M rows/s)")

    try:
        start = time.perf_counter()
        vals_numba, flags_nb = tape.run_tape(program, X, backend="numba")
        t_cold = time.perf_counter() - start
    except Exception as err:
        print(f"numba unavailable ({err}); numpy fallback only")
        return 0

    t_warm = best_of(lambda: tape.run_tape(program, X, backend="numba"),
                     args.repeats)
    print(f"numba cold  {t_cold * 1e3:9.2f} ms   (includes JIT)")
    print(f"numba warm  {t_warm * 1e3:9.2f} ms   "
          f"({args.rows / t_warm / 1e6:.1f} M rows/s, "
          f"{t_numpy / t_warm:.1f}x vs numpy)")

    assert np.array_equal(flags, flags_nb)
    denom = np.maximum(np.abs(vals_numpy), 1.0)
    deviation = float(np.max(np.abs(vals_numpy - vals_numba) / denom))
    print(f"max relative deviation between backends: {deviation:.3e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

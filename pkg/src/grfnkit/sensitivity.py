"""Variance-based global sensitivity analysis of a lowered network.

Inputs are treated as independent uniforms over user-supplied bounds.
First-order indices use the Saltelli estimator, total-order indices the
Jansen estimator, both over a common pair of sample matrices, so one
call costs n*(k+2) model evaluations. A surface over the two most
influential inputs supports the kind of response plot the comparison
workflow ends with.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tape
from .errors import ValidationError
from .grfn import Grfn


def mc_tolerance(n: int) -> float:
    """Acceptance slack for Monte Carlo noise, about 3 sigma at size n."""
    return 3.0 / math.sqrt(n)


@dataclass(frozen=True)
class Bounds:
    """Per-variable (lo, hi) ranges; values are drawn uniformly."""

    entries: tuple[tuple[str, float, float], ...]

    def __post_init__(self):
        seen = set()
        for name, lo, hi in self.entries:
            if name in seen:
                raise ValidationError(f"duplicate bound for {name}")
            seen.add(name)
            if not lo < hi:
                raise ValidationError(
                    f"bound for {name} must satisfy lo < hi, got [{lo}, {hi}]")

    @classmethod
    def from_json_dict(cls, data: dict) -> "Bounds":
        entries = []
        for name in sorted(data):
            pair = data[name]
            if not isinstance(pair, (list, tuple)) or len(pair) != 2:
                raise ValidationError(f"bound for {name} must be [lo, hi]")
            entries.append((str(name), float(pair[0]), float(pair[1])))
        return cls(tuple(entries))

    def to_json_dict(self) -> dict:
        return {name: [lo, hi] for name, lo, hi in self.entries}

    def get(self, name: str) -> tuple[float, float]:
        for entry, lo, hi in self.entries:
            if entry == name:
                return lo, hi
        raise ValidationError(f"no bound for {name}")

    def require_cover(self, names) -> None:
        have = {name for name, _, _ in self.entries}
        missing = sorted(set(names) - have)
        if missing:
            raise ValidationError(f"bounds missing for inputs: {missing}")


@dataclass(frozen=True)
class SensitivityReport:
    output: str
    n_samples: int
    seed: int
    columns: tuple[str, ...]
    s1: tuple[float, ...]
    st: tuple[float, ...]
    variance: float
    degenerate: bool
    top_pair: tuple[str, ...]

    @property
    def first_order(self) -> dict[str, float]:
        return dict(zip(self.columns, self.s1))

    @property
    def total_order(self) -> dict[str, float]:
        return dict(zip(self.columns, self.st))

    def to_json_dict(self) -> dict:
        return {
            "output": self.output,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "variance": self.variance,
            "degenerate": self.degenerate,
            "inputs": {
                name: {"S1": s1, "ST": st}
                for name, s1, st in zip(self.columns, self.s1, self.st)
            },
            "top_pair": list(self.top_pair),
        }


def sobol_indices(grfn: Grfn, output: str, bounds: Bounds, n: int = 1024,
                  seed: int = 42, backend: str | None = None) -> SensitivityReport:
    """First- and total-order indices for every input of grfn.

    n must be a power of two (>= 64). A constant model has zero sample
    variance; its indices are reported as zero with the degenerate flag
    set rather than raising.
    """
    if n < 64 or n & (n - 1):
        raise ValidationError(f"sample count must be a power of two >= 64, got {n}")
    if grfn.final_version(output) is None:
        raise ValidationError(f"{output!r} is not an output of this network")
    columns = tuple(sorted(grfn.inputs))
    if not columns:
        raise ValidationError("the network has no inputs to vary")
    bounds.require_cover(columns)

    k = len(columns)
    lo = np.array([bounds.get(c)[0] for c in columns])
    span = np.array([bounds.get(c)[1] - bounds.get(c)[0] for c in columns])
    rng = np.random.default_rng(seed)
    unit = rng.random((n, 2 * k))
    a = lo + unit[:, :k] * span
    b = lo + unit[:, k:] * span

    blocks = [a, b]
    for i in range(k):
        ab = a.copy()
        ab[:, i] = b[:, i]
        blocks.append(ab)
    values = tape.batch_execute(grfn, output, np.vstack(blocks), columns, backend)

    fa = values[:n]
    fb = values[n:2 * n]
    variance = float(np.var(np.concatenate([fa, fb])))
    degenerate = not (variance > 0.0 and math.isfinite(variance))

    s1 = []
    st = []
    for i in range(k):
        fab = values[(2 + i) * n:(3 + i) * n]
        if degenerate:
            s1.append(0.0)
            st.append(0.0)
        else:
            s1.append(float(np.mean(fb * (fab - fa)) / variance))
            st.append(float(0.5 * np.mean((fa - fab) ** 2) / variance))

    order = sorted(range(k), key=lambda i: (-st[i], columns[i]))
    return SensitivityReport(
        output=output, n_samples=n, seed=seed, columns=columns,
        s1=tuple(s1), st=tuple(st), variance=variance, degenerate=degenerate,
        top_pair=tuple(columns[i] for i in order[:2]),
    )


@dataclass(frozen=True)
class Surface:
    x_name: str
    y_name: str
    xs: tuple[float, ...]
    ys: tuple[float, ...]
    values: tuple[tuple[float, ...], ...]  # values[i][j] = f(xs[i], ys[j])

    def rows(self):
        """(x, y, f) triples, row-major in x."""
        for i, x in enumerate(self.xs):
            for j, y in enumerate(self.ys):
                yield x, y, self.values[i][j]

    def to_csv(self) -> str:
        lines = ["x,y,f"]
        for x, y, f in self.rows():
            lines.append(f"{x!r},{y!r},{f!r}")
        return "\n".join(lines) + "\n"


def top_pair_surface(grfn: Grfn, output: str, bounds: Bounds,
                     report: SensitivityReport, grid: int = 21,
                     backend: str | None = None) -> Surface:
    """Evaluate `output` over a grid spanning the two top-ranked inputs.

    Every other input sits at the midpoint of its bound. Grid points
    run row-major: the first input of the pair varies slowest.
    """
    if grid < 2:
        raise ValidationError(f"grid must be at least 2, got {grid}")
    if len(report.top_pair) < 2:
        raise ValidationError("a surface needs at least two inputs")
    columns = report.columns
    x_name, y_name = report.top_pair
    xs = np.linspace(*bounds.get(x_name), grid)
    ys = np.linspace(*bounds.get(y_name), grid)

    mid = np.array([sum(bounds.get(c)) / 2.0 for c in columns])
    samples = np.tile(mid, (grid * grid, 1))
    samples[:, columns.index(x_name)] = np.repeat(xs, grid)
    samples[:, columns.index(y_name)] = np.tile(ys, grid)

    values = tape.batch_execute(grfn, output, samples, columns, backend)
    values = values.reshape(grid, grid)
    return Surface(
        x_name=x_name, y_name=y_name,
        xs=tuple(float(x) for x in xs),
        ys=tuple(float(y) for y in ys),
        values=tuple(tuple(float(v) for v in row) for row in values),
    )

"""Basin-of-attraction maps over a rectangular grid of starting points.

Two chosen coordinates sweep the half-open ranges (lo, hi] with grid
nodes at cell centers; the remaining coordinates stay at a fixed base
point.  Every node is fed to `find_equilibrium`; converged runs are
matched to the list of discovered equilibria within ``match_tol``
(infinity norm) and labeled by index, everything else is labeled -1.
Labels are canonicalized in a post-pass that sorts the equilibria
lexicographically by coordinates, so the output does not depend on the
traversal or on how work was split across processes.

Output files:

* CSV with header ``x,y,label``, nodes enumerated with the first swept
  axis outermost, floats with 17 significant digits.
* ASCII PGM (P2): label -1 maps to gray 0 (black); labels take evenly
  spaced grays from 64 to 255, label 0 darkest and the remaining values
  handed out brightest-first (for three equilibria: 64, 255, 160).
  Rows run from the top, i.e. the second swept axis decreasing.
* JSON sidecar with the equilibria, grid description, tolerances and
  per-label cell counts.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import jsonio
from .field import SplitField
from .sapprox import CONVERGED, find_equilibrium

__all__ = ["GridSpec", "BasinGrid", "sweep", "write_basin_csv", "write_basin_pgm",
           "write_basin_json", "gray_ramp"]


@dataclass(frozen=True)
class GridSpec:
    """Sweep geometry: two swept axes over (lo, hi], others fixed at base."""

    axes: tuple[int, int]
    lo: tuple[float, float]
    hi: tuple[float, float]
    resolution: tuple[int, int]
    base: tuple[float, ...] | None = None

    def __post_init__(self):
        a0, a1 = self.axes
        if a0 == a1:
            raise ValueError("the two swept axes must differ")
        # lo = 0 is fine: start points are cell centers, strictly inside the range
        for lo, hi in zip(self.lo, self.hi):
            if not (0.0 <= lo < hi):
                raise ValueError("ranges must satisfy 0 <= lo < hi")
        for r in self.resolution:
            if r < 1:
                raise ValueError("resolution must be at least 1")
        if self.base is not None and np.any(np.asarray(self.base) <= 0.0):
            raise ValueError("base point must be strictly positive")

    def centers(self, k: int) -> np.ndarray:
        """Cell-center coordinates along swept axis k (0 or 1)."""
        lo, hi, res = self.lo[k], self.hi[k], self.resolution[k]
        delta = (hi - lo) / res
        return lo + delta * (np.arange(res) + 0.5)

    def start_point(self, n: int, c0: float, c1: float) -> np.ndarray:
        x = np.ones(n) if self.base is None else np.asarray(self.base, dtype=float).copy()
        x[self.axes[0]] = c0
        x[self.axes[1]] = c1
        return x


@dataclass
class BasinGrid:
    """Result of a sweep: labels[i0, i1] for the cell-center start points."""

    spec: GridSpec
    eps: float
    max_iter: int
    match_tol: float
    labels: np.ndarray
    equilibria: list[np.ndarray]
    counts: list[int]
    unconverged: int


def _sweep_row(args):
    """Final converged points for one row of start points (None = failure)."""
    f, points, eps, max_iter, tol_det = args
    out = []
    for x0 in points:
        report = find_equilibrium(f, x0, eps=eps, max_iter=max_iter, tol_det=tol_det)
        out.append(report.x if report.status == CONVERGED else None)
    return out


def sweep(f: SplitField, spec: GridSpec, eps: float = 1e-5, max_iter: int = 50,
          match_tol: float | None = None, tol_det: float = 1e-12,
          jobs: int = 1) -> BasinGrid:
    """Run the solver on every grid node and label basins of attraction.

    ``jobs`` > 1 fans rows out over a process pool; results are labeled
    in a deterministic row-major pass afterwards, so the outcome is
    byte-identical to a serial sweep.
    """
    if match_tol is None:
        match_tol = 10.0 * eps
    res0, res1 = spec.resolution
    c0 = spec.centers(0)
    c1 = spec.centers(1)
    rows = [
        [spec.start_point(f.n, c0[i0], c1[i1]) for i1 in range(res1)]
        for i0 in range(res0)
    ]
    tasks = [(f, row, eps, max_iter, tol_det) for row in rows]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            finals = list(pool.map(_sweep_row, tasks, chunksize=4))
    else:
        finals = [_sweep_row(t) for t in tasks]

    labels = np.full((res0, res1), -1, dtype=int)
    equilibria: list[np.ndarray] = []
    for i0 in range(res0):
        for i1 in range(res1):
            x = finals[i0][i1]
            if x is None:
                continue
            if equilibria:
                dists = [float(np.max(np.abs(x - e))) for e in equilibria]
                k = int(np.argmin(dists))
                if dists[k] <= match_tol:
                    labels[i0, i1] = k
                    continue
                if dists[k] < 2.0 * match_tol:
                    # too far to match, too close to count as new
                    continue
            labels[i0, i1] = len(equilibria)
            equilibria.append(np.asarray(x, dtype=float))

    # canonical ordering: lexicographic by coordinates
    order = sorted(range(len(equilibria)), key=lambda k: tuple(equilibria[k]))
    remap = {old: new for new, old in enumerate(order)}
    relabeled = np.full_like(labels, -1)
    for old, new in remap.items():
        relabeled[labels == old] = new
    equilibria = [equilibria[k] for k in order]

    counts = [int(np.sum(relabeled == k)) for k in range(len(equilibria))]
    return BasinGrid(
        spec=spec,
        eps=eps,
        max_iter=max_iter,
        match_tol=match_tol,
        labels=relabeled,
        equilibria=equilibria,
        counts=counts,
        unconverged=int(np.sum(relabeled == -1)),
    )


def write_basin_csv(grid: BasinGrid, path) -> None:
    c0 = grid.spec.centers(0)
    c1 = grid.spec.centers(1)
    res0, res1 = grid.spec.resolution
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("x,y,label\n")
        for i0 in range(res0):
            for i1 in range(res1):
                fh.write(
                    f"{format(c0[i0], '.17g')},{format(c1[i1], '.17g')},"
                    f"{int(grid.labels[i0, i1])}\n"
                )


def gray_ramp(n_labels: int) -> list[int]:
    """Grays for labels 0..n-1: darkest first, then brightest-first.

    Evenly spaced values on [64, 255]; label 0 takes 64 and labels
    1, 2, ... take the remaining values from bright to dark, so three
    labels map to 64, 255, 160.
    """
    if n_labels <= 0:
        return []
    if n_labels == 1:
        return [255]
    levels = [round(64 + j * (255 - 64) / (n_labels - 1)) for j in range(n_labels)]
    return [levels[0]] + [levels[n_labels - j] for j in range(1, n_labels)]


def write_basin_pgm(grid: BasinGrid, path) -> None:
    """ASCII PGM view of the labels; -1 is black, top row = largest swept y."""
    ramp = gray_ramp(len(grid.equilibria))
    res0, res1 = grid.spec.resolution
    lines = ["P2", f"{res0} {res1}", "255"]
    for i1 in range(res1 - 1, -1, -1):
        row = []
        for i0 in range(res0):
            lab = int(grid.labels[i0, i1])
            row.append("0" if lab < 0 else str(ramp[lab]))
        # keep lines comfortably under the 70-character format limit
        line = ""
        for cell in row:
            if line and len(line) + 1 + len(cell) > 68:
                lines.append(line)
                line = cell
            else:
                line = cell if not line else line + " " + cell
        lines.append(line)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_basin_json(grid: BasinGrid, path) -> None:
    spec = grid.spec
    jsonio.dump(
        {
            "equilibria": [[float(v) for v in e] for e in grid.equilibria],
            "grid": {
                "axes": list(spec.axes),
                "lo": [float(v) for v in spec.lo],
                "hi": [float(v) for v in spec.hi],
                "resolution": list(spec.resolution),
                "base": None if spec.base is None else [float(v) for v in spec.base],
            },
            "eps": grid.eps,
            "max_iter": grid.max_iter,
            "match_tol": grid.match_tol,
            "counts": grid.counts,
            "unconverged": grid.unconverged,
        },
        path,
    )

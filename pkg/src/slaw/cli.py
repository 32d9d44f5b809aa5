"""Command-line interface.

Subcommands: solve (run the fixed-point iteration), approx (one tangent
S-system), stability (matrix verdicts), basins (grid sweep with CSV,
PGM and JSON outputs), simulate (fixed-step trajectories).  Exit codes:
0 success/converged, 1 bad input or model, 2 degenerate, 3 the field
left its valid domain or the iteration diverged, 4 iteration budget
exhausted.  Machine outputs are byte-stable: fixed key order and fixed
float formatting for identical invocations.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import jsonio, odesim
from .basin import GridSpec, sweep, write_basin_csv, write_basin_json, write_basin_pgm
from .errors import DegenerateError, NonPositiveFieldError, SlawError
from .field import SplitField, load_model
from .sapprox import (CONVERGED, DEGENERATE, DIVERGED, MAX_ITER,
                      NON_POSITIVE_FIELD, find_equilibrium, s_approximate)
from .ssystem import (SSystem, classify, eigenvalues, equilibrium,
                      sign_semi_stable, ssystem_from_dict, ssystem_to_dict)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_DEGENERATE = 2
EXIT_DOMAIN = 3
EXIT_MAX_ITER = 4

_STATUS_EXIT = {
    CONVERGED: EXIT_OK,
    DEGENERATE: EXIT_DEGENERATE,
    NON_POSITIVE_FIELD: EXIT_DOMAIN,
    DIVERGED: EXIT_DOMAIN,
    MAX_ITER: EXIT_MAX_ITER,
}


@dataclass
class RunConfig:
    """Numeric knobs shared by the subcommands, with the documented defaults."""

    eps: float = 1e-5
    max_iter: int = 50
    tol_det: float = 1e-12
    tol_hyp: float | None = None
    zero_tol: float | None = None
    seed: int = 0
    jobs: int | None = None

    @classmethod
    def from_args(cls, args) -> "RunConfig":
        cfg = cls()
        for name in ("eps", "max_iter", "tol_det", "tol_hyp", "zero_tol", "seed", "jobs"):
            if hasattr(args, name) and getattr(args, name) is not None:
                setattr(cfg, name, getattr(args, name))
        return cfg


def _fmt(v: float) -> str:
    return format(float(v), ".10g")


def _fmt_complex(z: complex) -> str:
    if abs(z.imag) <= 1e-12 * max(1.0, abs(z)):
        return _fmt(z.real)
    sign = "+" if z.imag >= 0 else "-"
    return f"{_fmt(z.real)}{sign}{_fmt(abs(z.imag))}i"


def _parse_vector(text: str, n: int | None = None) -> np.ndarray:
    try:
        vals = np.array([float(p) for p in text.split(",")])
    except ValueError:
        raise ValueError(f"expected a comma-separated vector, got '{text}'") from None
    if n is not None and vals.shape != (n,):
        raise ValueError(f"expected {n} components, got {vals.shape[0]}")
    return vals


def _power_law_lines(s: SSystem, names) -> list[str]:
    def product(coef: float, exponents) -> str:
        pieces = [_fmt(coef)]
        for name, e in zip(names, exponents):
            if abs(e) > 1e-12:
                pieces.append(f"{name}^{_fmt(e)}" if e != 1.0 else name)
        return "*".join(pieces)

    return [
        f"d{names[i]}/dt = {product(s.alpha[i], s.G[i])} - {product(s.beta[i], s.H[i])}"
        for i in range(s.n)
    ]


def _print_matrix(A: np.ndarray) -> None:
    for row in A:
        print("  [" + ", ".join(_fmt(v) for v in row) + "]")


def _stability_block(s: SSystem, cfg: RunConfig) -> None:
    try:
        info = equilibrium(s, tol_det=cfg.tol_det, tol_hyp=cfg.tol_hyp, zero_tol=cfg.zero_tol)
    except (DegenerateError, SlawError) as exc:
        print(f"stability analysis unavailable: {exc}")
        return
    print("eigenvalues: " + ", ".join(_fmt_complex(z) for z in info.eigenvalues))
    print(f"classification: {info.classification}")
    print(f"sign pattern: {info.qrm.describe()}")


def cmd_solve(args) -> int:
    cfg = RunConfig.from_args(args)
    f = load_model(args.model)
    x0 = _parse_vector(args.x0, f.n)
    report = find_equilibrium(
        f, x0, eps=cfg.eps, max_iter=cfg.max_iter, tol_det=cfg.tol_det,
        relative=args.relative_norm,
    )
    print(f"status: {report.status}")
    print(f"iterations: {report.steps}")
    if args.trace:
        print("iterates:")
        for k, it in enumerate(report.iterates):
            print(f"  {k}: " + ", ".join(_fmt(v) for v in it))
    final = report.x
    label = "equilibrium" if report.status == CONVERGED else "final point"
    print(f"{label}: " + ", ".join(f"{nm} = {_fmt(v)}" for nm, v in zip(f.names, final)))
    if report.residual is not None:
        print(f"residual: {_fmt(report.residual)}")
    if report.message:
        print(f"detail: {report.message}")
    if report.ssystem is not None:
        print("S-system at the final point:")
        for line in _power_law_lines(report.ssystem, f.names):
            print(f"  {line}")
    if report.status == CONVERGED and report.ssystem is not None:
        _stability_block(report.ssystem, cfg)
    if report.status == DEGENERATE:
        rng = np.random.default_rng(cfg.seed)
        suggestion = x0 * (1.0 + rng.uniform(-0.05, 0.05, size=f.n))
        print("suggestion: restart from a perturbed point, e.g. --x0 "
              + ",".join(_fmt(v) for v in suggestion))
    if args.out:
        jsonio.dump(report.to_dict(), args.out)
        print(f"wrote {args.out}")
    return _STATUS_EXIT[report.status]


def cmd_approx(args) -> int:
    f = load_model(args.model)
    at = _parse_vector(args.at, f.n)
    try:
        approx = s_approximate(f, at)
    except NonPositiveFieldError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    s = approx.ssystem
    print("S-approximation at (" + ", ".join(_fmt(v) for v in at) + "):")
    for line in _power_law_lines(s, f.names):
        print(f"  {line}")
    print("G - H:")
    _print_matrix(s.G - s.H)
    if args.out:
        jsonio.dump(ssystem_to_dict(s), args.out)
        print(f"wrote {args.out}")
    return EXIT_OK


def cmd_stability(args) -> int:
    cfg = RunConfig.from_args(args)
    try:
        A = np.array(json.loads(args.matrix), dtype=float)
    except (json.JSONDecodeError, ValueError) as exc:
        print(f"error: bad matrix: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        print("error: matrix must be square", file=sys.stderr)
        return EXIT_INPUT
    eigs = eigenvalues(A)
    word = {
        "asymptotically-stable": "stable",
        "unstable": "unstable",
        "non-hyperbolic": "non-hyperbolic",
    }[classify(eigs, cfg.tol_hyp)]
    verdict = sign_semi_stable(A, cfg.zero_tol)
    eig_text = ", ".join(_fmt_complex(z) for z in eigs)
    if verdict.semi_stable:
        joiner = "and" if word == "stable" else "but"
        print(f"{word} (eigenvalues {eig_text}) {joiner} sign semi-stable")
    else:
        joiner = "but" if word == "stable" else "and"
        print(f"{word} (eigenvalues {eig_text}) {joiner} NOT "
              + verdict.describe().replace("not sign semi-stable: ", "sign semi-stable: "))
    return EXIT_OK


def _parse_ranges(text: str) -> tuple[tuple[float, float], tuple[float, float]]:
    parts = text.split(",")
    if len(parts) == 1:
        parts = [parts[0], parts[0]]
    if len(parts) != 2:
        raise ValueError("expected LO:HI or LO:HI,LO:HI")
    out = []
    for part in parts:
        lo_hi = part.split(":")
        if len(lo_hi) != 2:
            raise ValueError(f"bad range '{part}', expected LO:HI")
        out.append((float(lo_hi[0]), float(lo_hi[1])))
    return out[0], out[1]


def cmd_basins(args) -> int:
    cfg = RunConfig.from_args(args)
    f = load_model(args.model)
    if f.n < 2:
        print("error: basin sweeps need at least two variables", file=sys.stderr)
        return EXIT_INPUT
    if args.axes:
        names = [p.strip() for p in args.axes.split(",")]
        if len(names) != 2 or any(nm not in f.names for nm in names):
            print(f"error: --axes must name two model variables", file=sys.stderr)
            return EXIT_INPUT
        axes = (f.names.index(names[0]), f.names.index(names[1]))
    else:
        axes = (0, 1)
    (lo0, hi0), (lo1, hi1) = _parse_ranges(args.range)
    res = [int(p) for p in str(args.res).split(",")]
    if len(res) == 1:
        res = [res[0], res[0]]
    base = None
    if args.base:
        base = tuple(_parse_vector(args.base, f.n))
    jobs = cfg.jobs
    if jobs is None:
        jobs = int(os.environ.get("SLAW_JOBS", 0)) or (os.cpu_count() or 1)
    spec = GridSpec(axes=axes, lo=(lo0, lo1), hi=(hi0, hi1),
                    resolution=(res[0], res[1]), base=base)
    grid = sweep(f, spec, eps=cfg.eps, max_iter=cfg.max_iter, tol_det=cfg.tol_det,
                 jobs=jobs)
    ax0, ax1 = f.names[axes[0]], f.names[axes[1]]
    print(f"grid: {res[0]}x{res[1]} on ({_fmt(lo0)}, {_fmt(hi0)}] x ({_fmt(lo1)}, {_fmt(hi1)}] "
          f"over ({ax0}, {ax1})")
    print(f"equilibria: {len(grid.equilibria)}")
    for k, (eq, cnt) in enumerate(zip(grid.equilibria, grid.counts)):
        coords = ", ".join(f"{nm} = {_fmt(v)}" for nm, v in zip(f.names, eq))
        print(f"  {k}: {coords}   cells: {cnt}")
    print(f"unconverged cells: {grid.unconverged}")
    prefix = args.out or Path(args.model).stem
    write_basin_csv(grid, f"{prefix}.csv")
    write_basin_pgm(grid, f"{prefix}.pgm")
    write_basin_json(grid, f"{prefix}.json")
    print(f"wrote {prefix}.csv, {prefix}.pgm, {prefix}.json")
    return EXIT_OK


def cmd_simulate(args) -> int:
    if (args.model is None) == (args.ssystem is None):
        print("error: give a model file or --ssystem, not both", file=sys.stderr)
        return EXIT_INPUT
    if args.model is not None:
        system = load_model(args.model)
        names = system.names
    else:
        with open(args.ssystem, "r", encoding="utf-8") as fh:
            system = ssystem_from_dict(json.load(fh))
        names = tuple(f"x{i + 1}" for i in range(system.n))
    x0 = _parse_vector(args.x0, system.n)
    traj = odesim.integrate(system, x0, dt=args.dt, t_end=args.t)
    final = traj.final
    print(f"integrated to t = {_fmt(traj.times[-1])} in {len(traj.times) - 1} steps"
          + (" (truncated)" if traj.truncated else ""))
    print("final state: " + ", ".join(f"{nm} = {_fmt(v)}" for nm, v in zip(names, final)))
    if args.out:
        odesim.write_trajectory_csv(traj, args.out, names)
        print(f"wrote {args.out}")
    return EXIT_OK


def _add_tolerance_options(p: argparse.ArgumentParser, *, iteration: bool = True) -> None:
    if iteration:
        p.add_argument("--eps", type=float, default=None,
                       help="stopping tolerance for the iteration (default 1e-5)")
        p.add_argument("--max-iter", type=int, default=None, dest="max_iter",
                       help="iteration budget (default 50)")
        p.add_argument("--tol-det", type=float, default=None, dest="tol_det",
                       help="relative determinant floor for degeneracy (default 1e-12)")
    p.add_argument("--tol-hyp", type=float, default=None, dest="tol_hyp",
                   help="absolute eigenvalue real-part threshold for classification "
                        "(default 1e-9 scaled by the spectral radius)")
    p.add_argument("--zero-tol", type=float, default=None, dest="zero_tol",
                   help="absolute threshold below which matrix entries count as zero "
                        "(default 1e-12 * ||A||_inf)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slaw",
        description="Find positive equilibria of ODE systems by iterated "
                    "power-law approximation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="iterate to an equilibrium from a starting point")
    p.add_argument("model", help="model file")
    p.add_argument("--x0", required=True, help="starting point, comma separated")
    _add_tolerance_options(p)
    p.add_argument("--relative-norm", action="store_true", dest="relative_norm",
                   help="use a relative instead of absolute step criterion")
    p.add_argument("--trace", action="store_true", help="print every iterate")
    p.add_argument("--seed", type=int, default=None,
                   help="seed for the perturbed-restart suggestion (default 0)")
    p.add_argument("--out", help="write the run report as JSON")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("approx", help="tangent S-system at a point")
    p.add_argument("model", help="model file")
    p.add_argument("--at", required=True, help="expansion point, comma separated")
    p.add_argument("--out", help="write the S-system as JSON")
    p.set_defaults(func=cmd_approx)

    p = sub.add_parser("stability", help="eigenvalue and sign-pattern verdicts for a matrix")
    p.add_argument("--matrix", required=True,
                   help="square matrix as inline JSON, e.g. '[[-3,2],[-2,1]]'")
    _add_tolerance_options(p, iteration=False)
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("basins", help="basin-of-attraction map over a grid")
    p.add_argument("model", help="model file")
    p.add_argument("--range", default="0:4", dest="range",
                   help="swept range LO:HI, or LO:HI,LO:HI per axis (default 0:4)")
    p.add_argument("--res", default="100",
                   help="grid resolution, one value or N0,N1 (default 100)")
    p.add_argument("--axes", help="the two swept variables, e.g. x,y (default: first two)")
    p.add_argument("--base", help="fixed values for the remaining variables, full vector")
    _add_tolerance_options(p)
    p.add_argument("--jobs", type=int, default=None,
                   help="worker processes (default: SLAW_JOBS or the CPU count)")
    p.add_argument("--out", help="output file prefix (default: model file stem)")
    p.set_defaults(func=cmd_basins)

    p = sub.add_parser("simulate", help="fixed-step trajectory")
    p.add_argument("model", nargs="?", help="model file")
    p.add_argument("--ssystem", help="integrate an S-system from a JSON file instead")
    p.add_argument("--x0", required=True, help="starting state, comma separated")
    p.add_argument("--t", type=float, default=20.0, help="end time (default 20)")
    p.add_argument("--dt", type=float, default=0.01, help="step size (default 0.01)")
    p.add_argument("--out", help="write the trajectory as CSV")
    p.set_defaults(func=cmd_simulate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SlawError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

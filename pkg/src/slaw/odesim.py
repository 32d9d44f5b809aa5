"""Fixed-step trajectory integration and field-vs-surrogate comparison.

The integrator is the classical fourth-order Runge-Kutta scheme with a
uniform step.  It works on anything with ``n`` and ``rhs(x)`` (split
fields and S-systems both qualify) and stops early, flagging the
trajectory as truncated, when a state component falls to the positive
floor or any evaluation leaves the valid domain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteError, NonPositiveFieldError

__all__ = ["Trajectory", "integrate", "FlowComparison", "flow_compare", "write_trajectory_csv"]

_DOMAIN_ERRORS = (NonPositiveFieldError, NonFiniteError, ValueError)


@dataclass
class Trajectory:
    """States sampled on a uniform time grid; ``truncated`` marks an early stop."""

    times: np.ndarray
    states: np.ndarray
    truncated: bool

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def _rk4_step(rhs, x: np.ndarray, dt: float) -> np.ndarray:
    # overflow in a stage of an escaping trajectory is expected; the
    # caller checks the result for finiteness and truncates
    with np.errstate(over="ignore", invalid="ignore"):
        k1 = rhs(x)
        k2 = rhs(x + 0.5 * dt * k1)
        k3 = rhs(x + 0.5 * dt * k2)
        k4 = rhs(x + dt * k3)
        return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(system, x0, dt: float, t_end: float, pos_floor: float = 1e-300) -> Trajectory:
    """Integrate dx/dt = system.rhs(x) from x0 with fixed step dt.

    Records states at t = 0, dt, 2*dt, ... up to round(t_end / dt)
    steps.  Stops early (``truncated=True``) as soon as a step cannot be
    completed: a stage evaluation leaves the domain, or the new state
    has a component <= pos_floor or a non-finite one.
    """
    if dt <= 0.0 or t_end <= 0.0:
        raise ValueError("dt and t_end must be positive")
    x = np.asarray(x0, dtype=float)
    if not np.all(np.isfinite(x)) or np.any(x <= 0.0):
        raise ValueError("starting state must be strictly positive and finite")
    n_steps = max(1, int(round(t_end / dt)))
    states = [x.copy()]
    truncated = False
    for _ in range(n_steps):
        try:
            x_new = _rk4_step(system.rhs, x, dt)
        except _DOMAIN_ERRORS:
            truncated = True
            break
        if not np.all(np.isfinite(x_new)) or np.any(x_new <= pos_floor):
            truncated = True
            break
        states.append(x_new)
        x = x_new
    m = len(states)
    return Trajectory(times=dt * np.arange(m), states=np.array(states), truncated=truncated)


def write_trajectory_csv(traj: Trajectory, path, names=None) -> None:
    """Write t,x1,...,xn rows with 17-significant-digit floats."""
    n = traj.states.shape[1]
    if names is None:
        names = [f"x{i + 1}" for i in range(n)]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t," + ",".join(names) + "\n")
        for t, row in zip(traj.times, traj.states):
            cells = [format(float(t), ".17g")] + [format(float(v), ".17g") for v in row]
            fh.write(",".join(cells) + "\n")


CONVERGED = "converged"
ESCAPED = "escaped"
UNDECIDED = "undecided"


@dataclass
class SeedComparison:
    seed: np.ndarray
    fate_field: str
    fate_surrogate: str
    max_discrepancy: float

    @property
    def agree(self) -> bool:
        return self.fate_field == self.fate_surrogate


@dataclass
class FlowComparison:
    """Side-by-side fate of seeds under a field and its local surrogate."""

    x_eq: np.ndarray
    radius: float
    conv_tol: float
    escape_radius: float
    dt: float
    t_end: float
    seeds: list[SeedComparison]

    @property
    def n_agree(self) -> int:
        return sum(1 for s in self.seeds if s.agree)

    @property
    def max_discrepancy(self) -> float:
        return max((s.max_discrepancy for s in self.seeds), default=0.0)

    def fate_counts(self, which: str = "field") -> dict[str, int]:
        counts = {CONVERGED: 0, ESCAPED: 0, UNDECIDED: 0}
        for s in self.seeds:
            counts[s.fate_field if which == "field" else s.fate_surrogate] += 1
        return counts

    def to_dict(self) -> dict:
        return {
            "x_eq": [float(v) for v in self.x_eq],
            "radius": self.radius,
            "conv_tol": self.conv_tol,
            "escape_radius": self.escape_radius,
            "dt": self.dt,
            "t_end": self.t_end,
            "n_seeds": len(self.seeds),
            "n_agree": self.n_agree,
            "max_discrepancy": self.max_discrepancy,
            "seeds": [
                {
                    "seed": [float(v) for v in s.seed],
                    "fate_field": s.fate_field,
                    "fate_surrogate": s.fate_surrogate,
                    "agree": s.agree,
                    "max_discrepancy": s.max_discrepancy,
                }
                for s in self.seeds
            ],
        }


def seed_points(x_eq: np.ndarray, radius: float, n_seeds: int, rng_seed: int = 0) -> list[np.ndarray]:
    """Deterministic seeds on the infinity-norm sphere around x_eq.

    In two dimensions the seeds sit at equally spaced angles projected
    onto the square of radius ``radius``; in other dimensions random
    directions from a fixed generator are projected the same way.
    """
    n = x_eq.shape[0]
    seeds = []
    if n == 2:
        for m in range(n_seeds):
            theta = 2.0 * np.pi * m / n_seeds
            d = np.array([np.cos(theta), np.sin(theta)])
            seeds.append(x_eq + radius * d / np.max(np.abs(d)))
    else:
        rng = np.random.default_rng(rng_seed)
        for _ in range(n_seeds):
            d = rng.standard_normal(n)
            while np.max(np.abs(d)) < 1e-12:
                d = rng.standard_normal(n)
            seeds.append(x_eq + radius * d / np.max(np.abs(d)))
    return seeds


def _run_fate(system, seed, x_eq, conv_tol, escape_radius, dt, n_steps):
    """Fate of one seed plus its recorded states (up to stop)."""
    x = seed.copy()
    states = [x.copy()]
    for _ in range(n_steps):
        try:
            x = _rk4_step(system.rhs, x, dt)
        except _DOMAIN_ERRORS:
            return ESCAPED, states
        if not np.all(np.isfinite(x)) or np.any(x <= 0.0):
            return ESCAPED, states
        states.append(x.copy())
        if float(np.max(np.abs(x - x_eq))) > escape_radius:
            return ESCAPED, states
    fate = CONVERGED if float(np.max(np.abs(x - x_eq))) <= conv_tol else UNDECIDED
    return fate, states


def flow_compare(f, s, x_eq, radius: float = 0.05, n_seeds: int = 16,
                 dt: float = 0.01, t_end: float = 40.0,
                 conv_tol: float | None = None, escape_factor: float = 10.0,
                 rng_seed: int = 0) -> FlowComparison:
    """Compare trajectories of a field and a surrogate S-system near x_eq.

    Each seed on the infinity-sphere of the given radius is integrated
    under both systems.  A run converges when it ends within
    ``conv_tol`` (default radius / 1000) of x_eq, escapes as soon as it
    leaves the ball of ``escape_factor * radius`` (or exits the domain),
    and is undecided otherwise.  ``max_discrepancy`` is the largest
    state difference over the common recorded times of the two runs.
    """
    x_eq = np.asarray(x_eq, dtype=float)
    if radius <= 0.0 or np.any(x_eq - radius <= 0.0):
        raise ValueError("radius must be positive and keep seeds inside the positive orthant")
    if conv_tol is None:
        conv_tol = 1e-3 * radius
    escape_radius = escape_factor * radius
    n_steps = max(1, int(round(t_end / dt)))
    comparisons = []
    for seed in seed_points(x_eq, radius, n_seeds, rng_seed):
        fate_f, states_f = _run_fate(f, seed, x_eq, conv_tol, escape_radius, dt, n_steps)
        fate_s, states_s = _run_fate(s, seed, x_eq, conv_tol, escape_radius, dt, n_steps)
        m = min(len(states_f), len(states_s))
        disc = 0.0
        for a, b in zip(states_f[:m], states_s[:m]):
            disc = max(disc, float(np.max(np.abs(a - b))))
        comparisons.append(SeedComparison(seed, fate_f, fate_s, disc))
    return FlowComparison(
        x_eq=x_eq,
        radius=radius,
        conv_tol=conv_tol,
        escape_radius=escape_radius,
        dt=dt,
        t_end=dt * n_steps,
        seeds=comparisons,
    )

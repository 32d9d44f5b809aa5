"""Integrator and flow-comparison tests."""

import json

import numpy as np
import pytest

from slaw.field import load_model, parse_model
from slaw.odesim import (CONVERGED, ESCAPED, UNDECIDED, Trajectory,
                         flow_compare, integrate, seed_points,
                         write_trajectory_csv)
from slaw.sapprox import s_approximate

from oracles import SWITCH_MODEL


@pytest.fixture(scope="module")
def relax():
    # dx/dt = 1 - x, exact solution x(t) = 1 + (x0 - 1) e^{-t}
    return parse_model("""
var x
plus x  : 1
minus x : x
""")


def test_rk4_fourth_order(relax):
    x0 = 0.5
    exact = 1.0 - 0.5 * np.exp(-1.0)
    errors = []
    for dt in (0.1, 0.05, 0.025):
        traj = integrate(relax, (x0,), dt=dt, t_end=1.0)
        assert not traj.truncated
        errors.append(abs(float(traj.final[0]) - exact))
    orders = [np.log2(errors[i] / errors[i + 1]) for i in range(2)]
    for p in orders:
        assert 3.5 <= p <= 4.5


def test_time_grid(relax):
    traj = integrate(relax, (0.5,), dt=0.1, t_end=1.0)
    assert traj.states.shape == (11, 1)
    assert traj.times == pytest.approx(0.1 * np.arange(11), abs=1e-15)
    assert np.all(traj.final == traj.states[-1])


def test_exact_equilibrium_is_stationary():
    # both terms of each component evaluate to the same float at (1.5, 1),
    # so the right-hand side is exactly zero and RK4 cannot move
    f = load_model(SWITCH_MODEL)
    traj = integrate(f, (1.5, 1.0), dt=0.05, t_end=2.0)
    assert not traj.truncated
    assert np.all(traj.states == np.array([1.5, 1.0]))


def test_ssystem_rhs_integrates():
    f = load_model(SWITCH_MODEL)
    s = s_approximate(f, (2.0, 2.0)).ssystem
    traj = integrate(s, (2.0, 2.0), dt=0.01, t_end=1.0)
    assert not traj.truncated
    assert traj.states.shape == (101, 2)


def test_truncation_on_positivity_loss():
    # production is bounded by 1 while decay pushes at rate 2, so the
    # trajectory crosses zero in finite time and the run must stop early
    f = parse_model("""
var x
plus x  : 1/(1 + x^2)
minus x : 2*x^0
""")
    traj = integrate(f, (1.0,), dt=0.01, t_end=5.0)
    assert traj.truncated
    assert len(traj.times) < 501
    assert np.all(traj.states > 0.0)


def test_integrate_input_validation(relax):
    with pytest.raises(ValueError):
        integrate(relax, (1.0,), dt=0.0, t_end=1.0)
    with pytest.raises(ValueError):
        integrate(relax, (1.0,), dt=0.1, t_end=-1.0)
    with pytest.raises(ValueError):
        integrate(relax, (-1.0,), dt=0.1, t_end=1.0)
    with pytest.raises(ValueError):
        integrate(relax, (float("nan"),), dt=0.1, t_end=1.0)


def test_trajectory_csv(tmp_path, relax):
    traj = integrate(relax, (0.5,), dt=0.25, t_end=1.0)
    path = tmp_path / "traj.csv"
    write_trajectory_csv(traj, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,x1"
    assert len(lines) == 6
    t, x = (float(v) for v in lines[3].split(","))
    assert t == float(traj.times[2])
    assert x == float(traj.states[2, 0])


def test_trajectory_csv_names(tmp_path):
    traj = Trajectory(times=np.array([0.0, 0.5]),
                      states=np.array([[1.0, 2.0], [3.0, 4.0]]),
                      truncated=False)
    path = tmp_path / "traj.csv"
    write_trajectory_csv(traj, path, names=["u", "w"])
    lines = path.read_text().splitlines()
    assert lines[0] == "t,u,w"
    assert lines[2] == "0.5,3,4"


def test_seed_points_2d():
    x_eq = np.array([2.0, 2.0])
    seeds = seed_points(x_eq, 0.05, 8)
    assert len(seeds) == 8
    assert seeds[0] == pytest.approx([2.05, 2.0], abs=1e-15)
    for s in seeds:
        # all seeds sit on the infinity-norm sphere
        assert float(np.max(np.abs(s - x_eq))) == pytest.approx(0.05, abs=1e-15)
    again = seed_points(x_eq, 0.05, 8)
    for a, b in zip(seeds, again):
        assert np.all(a == b)


def test_seed_points_nd_deterministic():
    x_eq = np.array([1.0, 2.0, 3.0])
    a = seed_points(x_eq, 0.1, 5, rng_seed=7)
    b = seed_points(x_eq, 0.1, 5, rng_seed=7)
    c = seed_points(x_eq, 0.1, 5, rng_seed=8)
    assert all(np.all(u == v) for u, v in zip(a, b))
    assert any(np.any(u != v) for u, v in zip(a, c))
    for s in a:
        assert float(np.max(np.abs(s - x_eq))) == pytest.approx(0.1, abs=1e-15)


def test_flow_compare_converging(relax):
    # the tangent power law at the equilibrium of dx/dt = 1 - x is
    # 1 - x itself, so the two routes follow the same vector field
    s = s_approximate(relax, (1.0,)).ssystem
    fc = flow_compare(relax, s, (1.0,), radius=0.1, n_seeds=4, dt=0.01, t_end=10.0)
    assert fc.n_agree == 4
    assert fc.fate_counts() == {CONVERGED: 4, ESCAPED: 0, UNDECIDED: 0}
    assert fc.fate_counts(which="surrogate")[CONVERGED] == 4
    assert fc.max_discrepancy < 1e-10


def test_flow_compare_escaping():
    # x = 1 is a repeller of dx/dt = x^2 - x; every seed must leave
    f = parse_model("""
var x
plus x  : x^2
minus x : x
""")
    s = s_approximate(f, (1.0,)).ssystem
    fc = flow_compare(f, s, (1.0,), radius=0.1, n_seeds=2, dt=0.01,
                      t_end=10.0, escape_factor=5.0)
    assert fc.fate_counts() == {CONVERGED: 0, ESCAPED: 2, UNDECIDED: 0}
    assert fc.n_agree == 2


def test_flow_compare_undecided(relax):
    # a horizon too short to reach the convergence ball leaves all seeds open
    s = s_approximate(relax, (1.0,)).ssystem
    fc = flow_compare(relax, s, (1.0,), radius=0.1, n_seeds=2, dt=0.01, t_end=0.5)
    assert fc.fate_counts() == {CONVERGED: 0, ESCAPED: 0, UNDECIDED: 2}


def test_flow_compare_to_dict(relax):
    s = s_approximate(relax, (1.0,)).ssystem
    fc = flow_compare(relax, s, (1.0,), radius=0.1, n_seeds=2, dt=0.01, t_end=1.0)
    d = fc.to_dict()
    json.dumps(d)
    assert d["n_seeds"] == 2
    assert d["n_agree"] == fc.n_agree
    assert set(d["seeds"][0]) == {"seed", "fate_field", "fate_surrogate",
                                  "agree", "max_discrepancy"}


def test_flow_compare_radius_validation(relax):
    s = s_approximate(relax, (1.0,)).ssystem
    with pytest.raises(ValueError):
        flow_compare(relax, s, (1.0,), radius=1.0)
    with pytest.raises(ValueError):
        flow_compare(relax, s, (1.0,), radius=-0.1)

import math

import numpy as np
import pytest

from rswlab import lines, mild, model
from rswlab.errors import NotContracting
from rswlab.experiments import make_initial_data
from rswlab.grid import Grid, n_norm
from rswlab.model import CoriolisProfile, Params, State3
from rswlab.trajectory import TrajectoryMesh

TWO_PI = 2 * np.pi


def setup(n=64, A=0.05, eps=0.05, L=TWO_PI * 4, width=2.0):
    g = Grid(n, L)
    p = Params(eps=eps)
    V0 = model.symmetrize(make_initial_data("gaussian_bump", A, width, g, p), p.g)
    return g, p, V0, CoriolisProfile.constant(g, 1.0)


def test_trajectory_mesh_validation():
    g = Grid(8)
    E = State3.rest(g, Params())
    with pytest.raises(ValueError):
        TrajectoryMesh.constant(E, [0.0, 0.5, 0.5])
    m = TrajectoryMesh.constant(E, [0.0, 0.5, 1.0])
    assert len(m) == 3 and np.array_equal(m.final.data, E.data)


def test_duhamel_rest_fixed_point():
    g, p, _, cor = setup()
    E = State3.rest(g, p)
    mesh = TrajectoryMesh.constant(E, np.linspace(0, 0.1, 9))
    out = mild.duhamel_map(mesh, E, p, cor)
    assert np.max(np.abs(out.data - E.data)) <= 1e-14


def test_duhamel_pure_heat_flow():
    g, p, V0, _ = setup()
    E = State3.rest(g, p)
    times = np.linspace(0, 0.2, 9)
    out = mild.duhamel_map(TrajectoryMesh.constant(V0, times), V0, p, None, advection=False)
    for i, t in enumerate(times):
        exact = E.data + g.heat(V0.data - E.data, p.eps, t)
        assert np.max(np.abs(out.data[i] - exact)) <= 1e-14


def test_duhamel_v_component_stays_zero_without_rotation():
    g, p, V0, _ = setup()
    V0 = State3.from_components(g, V0.lam, V0.u, np.zeros(g.n))
    out = mild.duhamel_map(TrajectoryMesh.constant(V0, np.linspace(0, 0.05, 9)), V0, p, None)
    assert np.max(np.abs(out.data[:, 2])) <= 1e-15


def test_node_zero_is_initial_state():
    g, p, V0, cor = setup()
    traj, _ = mild.solve_window(V0, 0.01, 1e-12, 40, p, cor)
    assert np.array_equal(traj.data[0], V0.data)


def test_solve_window_rest_converges_at_once():
    g, p, _, cor = setup()
    E = State3.rest(g, p)
    _, rep = mild.solve_window(E, 0.1, 1e-12, 10, p, cor)
    assert rep.converged and rep.iterations == 1


def test_solve_window_geometric_convergence():
    g, p, V0, cor = setup()
    T = mild.window_length(V0, p)
    traj, rep = mild.solve_window(V0, T, 1e-12, 60, p, cor)
    assert rep.converged
    assert rep.distances[-1] <= 1e-12
    assert rep.contraction_ratio < 1
    # fixed-point residual
    again = mild.duhamel_map(traj, V0, p, cor)
    zero = State3(g, np.zeros((3, g.n)))
    res = max(n_norm(State3(g, again.data[i] - traj.data[i]), zero) for i in range(len(traj)))
    assert res <= 1e-10


def test_solve_window_huge_window_not_contracting():
    g, p, V0, cor = setup(A=0.3, eps=1e-3, n=128)
    with pytest.raises(NotContracting):
        mild.solve_window(V0, 50.0, 1e-12, 60, p, cor)


def test_contraction_ratio_monotone_in_window():
    g, p, V0, cor = setup()
    ratios = []
    for T in (0.4, 0.2, 0.1, 0.05):
        _, rep = mild.solve_window(V0, T, 1e-10, 80, p, cor, nodes=64)
        ratios.append(rep.contraction_ratio)
    assert all(b <= a * (1 + 1e-6) for a, b in zip(ratios, ratios[1:])), ratios


def test_pde_residual_of_window_solution():
    g, p, V0, cor = setup()
    E = State3.rest(g, p)
    res = []
    for nodes in (32, 64):
        traj, _ = mild.solve_window(V0, 0.05, 1e-13, 60, p, cor, nodes=nodes)
        dt = traj.times[1] - traj.times[0]
        worst = 0.0
        for i in range(1, len(traj) - 1):
            Vt = (traj.data[i + 1] - traj.data[i - 1]) / (2 * dt)
            V = traj.state(i)
            r = Vt - model.hyperbolic_rhs(V, E, cor).data - p.eps * g.diff(V.data, 2)
            worst = max(worst, float(np.max(np.abs(r))))
        res.append(worst)
    assert res[1] < res[0] / 3


def test_continuation_rest():
    g, p, _, cor = setup()
    E = State3.rest(g, p)
    mesh = mild.continuation(E, 1.0, p, cor)
    assert mesh.status == "complete"
    assert mesh.times[-1] == pytest.approx(1.0)
    assert np.max(np.abs(mesh.data - E.data)) <= 1e-14


def test_continuation_needs_viscosity():
    g, _, V0, cor = setup()
    with pytest.raises(ValueError):
        mild.continuation(V0, 1.0, Params(eps=0.0), cor)


def test_window_count_scaling_at_fixed_horizon():
    counts = []
    for A in (0.1, 0.2, 0.4):
        g, p, V0, cor = setup(n=32, A=A, eps=0.05, L=TWO_PI * 2, width=1.5)
        mesh = mild.continuation(V0, 0.5, p, cor, 1e-8, nodes=8)
        counts.append(len(mesh.windows))
    slope = np.polyfit(np.log([0.1, 0.2, 0.4]), np.log(counts), 1)[0]
    assert slope == pytest.approx(2, abs=0.3)


def test_continuation_agrees_with_lines_solver():
    g, p, V0, cor = setup(n=64)
    mesh = mild.continuation(V0, 0.2, p, cor, 1e-12)
    ref = lines.integrate(V0, lines.StepControl(0.2, dt_max=0.002), p, cor, sample_times=mesh.times, record=False)
    d = np.sqrt(np.max(np.sum((ref.mesh.data - mesh.data) ** 2, axis=(1, 2)) * g.dx))
    assert d <= 1e-5


def test_blowup_ceiling_stops_continuation():
    g, p, V0, cor = setup()
    mesh = mild.continuation(V0, 1.0, p, cor, n_ceiling=1e-3)
    assert mesh.status == "blowup_suspected"
    assert mesh.stop_time is not None and mesh.stop_time < 1.0

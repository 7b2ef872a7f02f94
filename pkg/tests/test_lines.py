import math

import numpy as np
import pytest

from rswlab import diagnostics, lines, model
from rswlab.errors import NonFinite
from rswlab.experiments import make_initial_data
from rswlab.grid import Grid
from rswlab.lines import StepControl
from rswlab.model import CoriolisProfile, Params, State3

TWO_PI = 2 * np.pi


def bump_state(n=64, L=TWO_PI * 4, A=0.05, width=2.0, eps=0.0):
    g = Grid(n, L)
    p = Params(eps=eps)
    return g, p, model.symmetrize(make_initial_data("gaussian_bump", A, width, g, p), p.g)


def test_cfl_dt_examples():
    g = Grid(64, TWO_PI)
    p = Params(g=1.0, h_bar=1.0)  # lambda_bar = 2, speeds (0, +-1)
    E = State3.rest(g, p)
    assert lines.cfl_dt(E, g, 0.4) == pytest.approx(0.4 * g.dx)
    V2 = State3.from_components(g, 2 * E.lam, 0 * g.x, 0 * g.x)
    assert lines.cfl_dt(V2, g, 0.4) == pytest.approx(0.5 * lines.cfl_dt(E, g, 0.4))
    assert lines.cfl_dt(E, g, 0.4, dt_max=1e-3) == 1e-3
    still = State3(g, np.zeros((3, g.n)))
    assert lines.cfl_dt(still, g, 0.4, dt_max=0.7) == 0.7


@pytest.mark.parametrize("kw", [{"cfl": 0}, {"cfl": 1.5}, {"dt_max": 0}, {"t_end": -1}, {"sample_every": 0}])
def test_step_control_validated(kw):
    args = {"t_end": 1.0, **kw}
    with pytest.raises(ValueError):
        StepControl(**args)


def test_rk4_rest_and_invariant_subspace():
    g, p, V = bump_state()
    E = State3.rest(g, p)
    assert np.array_equal(lines.step_hyperbolic_rk4(E, 0.01, E, CoriolisProfile.constant(g)).data, E.data)
    flat = State3.from_components(g, V.lam, V.u, np.zeros(g.n))
    out = lines.step_hyperbolic_rk4(flat, 0.01, E, None)
    assert np.all(out.v == 0)


def test_rk4_local_error_is_fifth_order():
    g, p, V = bump_state()
    E = State3.rest(g, p)
    cor = CoriolisProfile.sinusoidal(g, 1.0, 0.5)

    def local_err(dt):
        one = lines.step_hyperbolic_rk4(V, dt, E, cor)
        two = lines.step_hyperbolic_rk4(lines.step_hyperbolic_rk4(V, dt / 2, E, cor), dt / 2, E, cor)
        return np.max(np.abs(one.data - two.data))

    errs = [local_err(dt) for dt in (0.08, 0.04, 0.02)]
    rates = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert all(abs(r - 5) <= 0.3 for r in rates), rates


def test_rk4_raises_on_nonfinite():
    g, p, V = bump_state()
    bad = V.data.copy()
    bad[1, 3] = np.nan
    with pytest.raises(NonFinite):
        lines.step_hyperbolic_rk4(State3(g, bad), 0.01, State3.rest(g, p), None)


def test_strang_eps0_is_rk4_bitwise():
    g, p, V = bump_state()
    cor = CoriolisProfile.constant(g)
    a = lines.step_strang(V, 0.01, p, cor)
    b = lines.step_hyperbolic_rk4(V, 0.01, State3.rest(g, p), cor)
    assert np.array_equal(a.data, b.data)


def test_strang_pure_heat_is_exact():
    g, _, V = bump_state()
    p = Params(eps=0.3)
    out = lines.step_strang(V, 0.05, p, None, advection=False)
    assert np.max(np.abs(out.data - g.heat(V.data, p.eps, 0.05))) <= 1e-14 * np.max(np.abs(V.data))


def test_strang_global_order_two():
    g, _, V = bump_state()
    p = Params(eps=0.5)
    cor = CoriolisProfile.sinusoidal(g, 1.0, 0.5)
    finals = [lines.integrate(V, StepControl(0.4, dt_max=dt), p, cor, record=False).mesh.final.data
              for dt in (0.02, 0.01, 0.005)]
    order = math.log2(np.linalg.norm(finals[0] - finals[1]) / np.linalg.norm(finals[1] - finals[2]))
    assert abs(order - 2) <= 0.2


def test_rest_run_is_constant():
    g = Grid(32, TWO_PI)
    p = Params(eps=0.01)
    E = State3.rest(g, p)
    res = lines.integrate(E, StepControl(0.5), p, CoriolisProfile.constant(g))
    assert res.status == "complete"
    arr = diagnostics.records_array(res.records)
    assert np.all(arr[:, 1:] == arr[0, 1:])
    assert np.all(res.mesh.data == E.data)


def test_sampling_and_targets():
    g, p, V = bump_state(eps=0.01)
    p = Params(eps=0.01)
    targets = np.linspace(0, 0.3, 7)
    res = lines.integrate(V, StepControl(0.3), p, None, sample_times=targets)
    assert np.allclose(res.mesh.times, targets, rtol=0, atol=1e-15)
    seen = []
    res2 = lines.integrate(V, StepControl(0.3, sample_every=3), p, None, monitors=[lambda t, W: seen.append(t)])
    assert seen == list(res2.mesh.times)
    assert res2.mesh.times[-1] == pytest.approx(0.3, abs=1e-14)


def test_small_run_l2_distance_non_increasing():
    g, _, V = bump_state(A=0.01)
    p = Params(eps=0.05)
    res = lines.integrate(V, StepControl(1.0, dt_max=0.01), p, CoriolisProfile.constant(g))
    l2 = diagnostics.column(res.records, "l2_dist")
    # the advective transfer is cubic in the perturbation; at this size the
    # viscous decay wins at every step
    assert np.all(np.diff(l2) <= 1e-6 * l2[0])


def test_mass_conserved_at_eps0():
    g, p, V = bump_state()
    res = lines.integrate(V, StepControl(1.0, dt_max=0.01), p, CoriolisProfile.sinusoidal(g, 1.0, 0.5))
    total = diagnostics.column(res.records, "mass") + p.h_bar * g.length
    assert np.max(np.abs(total - total[0])) / total[0] <= 1e-8


def test_spatial_accuracy_is_spectral():
    finals = {}
    for n in (32, 64, 128):
        g, p, V = bump_state(n=n, L=TWO_PI * 4, A=0.02, width=1.5, eps=0.05)
        p = Params(eps=0.05)
        res = lines.integrate(V, StepControl(0.2, dt_max=0.002), p, None, record=False)
        finals[n] = res.mesh.final.data
    # compare on the common coarse nodes
    e32 = np.max(np.abs(finals[32] - finals[128][:, ::4]))
    e64 = np.max(np.abs(finals[64] - finals[128][:, ::2]))
    assert e64 < 1e-3 * e32 or e64 < 1e-12


def test_large_amplitude_inviscid_run_steepens():
    g = Grid(256, TWO_PI)
    p = Params(eps=0.0)
    V = model.symmetrize(make_initial_data("gaussian_bump", 0.5, 0.5, g, p), p.g)
    res = lines.integrate(V, StepControl(0.6, dt_max=0.005), p, None)
    sup = diagnostics.column(res.records, "sup_vx")
    assert res.status in ("complete", "nonfinite", "nonpositive")
    assert sup.max() > 5 * sup[0]


def test_nonpositive_stop_returns_partial_trajectory():
    g = Grid(64, TWO_PI)
    p = Params(g=1.0, eps=0.0)
    # strongly divergent velocity drains the centre
    lam = np.full(g.n, p.lambda_bar)
    u = 3.0 * np.sin(g.x)
    V = State3.from_components(g, lam, u, 0 * u)
    res = lines.integrate(V, StepControl(5.0, dt_max=0.01), p, None)
    assert res.status in ("nonpositive", "nonfinite")
    assert res.stop_time is not None and res.stop_time < 5.0
    assert len(res.mesh) >= 2

"""Acceptance gate: one test per criterion, each at its stated tolerance and runtime budget."""
import math
import time
from pathlib import Path

import numpy as np
import pytest

from rswlab import diagnostics as D
from rswlab import experiments as X
from rswlab import lines, mild, model
from rswlab.config import default_config, parse_config
from rswlab.grid import Grid
from rswlab.model import Params, State3
from rswlab.verify import energy_transfer_error, random_smooth_state

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0


# -- shared runs (module scope so criterion 9 reuses them) ----------------------


@pytest.fixture(scope="module")
def entropy_runs():
    """Criterion 4 runs: eps = 1e-2 at three fixed steps and an eps = 0 run."""
    with Timer() as clock:
        base = default_config(n=256, eps=1e-2, horizon=1.0).replace(**{"initial.amplitude": 0.05})
        viscous = {dt: X.run(base.replace(**{"step.dt_max": dt})) for dt in (0.02, 0.01, 0.005)}
        inviscid = X.run(base.replace(**{"params.eps": 0.0, "step.dt_max": 0.005}))
    return base, viscous, inviscid, clock.seconds


@pytest.fixture(scope="module")
def cross_runs():
    with Timer() as clock:
        cfg = parse_config(CONFIGS / "mild.ini")
        grid, p, cor, V0 = X.build(cfg)
        m = mild.continuation(V0, cfg.horizon, p, cor, cfg.mild.tol, c_w=cfg.mild.c_w, nodes=cfg.mild.nodes)
        ref = lines.integrate(V0, lines.StepControl(cfg.horizon), p, cor, sample_times=m.times, record=False)
    return cfg, grid, p, m, ref, clock.seconds


@pytest.fixture(scope="module")
def small_data_study():
    with Timer() as clock:
        res = X.small_data_global(parse_config(CONFIGS / "small_data.ini"), [1e-3], horizon=200.0)
    return res, clock.seconds


@pytest.fixture(scope="module")
def t0_study():
    with Timer() as clock:
        res = X.t0_scaling(parse_config(CONFIGS / "t0_scaling.ini"), [0.1, 0.2, 0.4])
    return res, clock.seconds


@pytest.fixture(scope="module")
def eps_sweep():
    with Timer() as clock:
        res = X.eps_cauchy_sweep(parse_config(CONFIGS / "eps_sweep.ini"), [4e-3, 2e-3, 1e-3, 5e-4], 2.5e-4)
    return res, clock.seconds


# -- criteria --------------------------------------------------------------------


def test_c01_heat_propagator(acceptance):
    rng = np.random.default_rng(0)
    with Timer() as clock:
        g = Grid(256, 2 * np.pi)
        eps = 0.01
        mode_err = 0.0
        for k in range(1, g.n // 2):
            f = np.sin(k * g.x)
            for t in (1e-3, 1e-2, 1e-1, 1.0):
                decay = math.exp(-eps * k * k * t)
                if decay < 1e-12:
                    # the mode sits below the rounding leakage of the input samples
                    continue
                ratio = np.fft.rfft(g.heat(f, eps, t))[k] / np.fft.rfft(f)[k]
                mode_err = max(mode_err, abs(ratio - decay) / decay)
        growth = -math.inf
        for a in rng.standard_normal((1000, g.n)):
            t = 10 ** rng.uniform(-4, 1)
            growth = max(growth, math.sqrt(g.norm_sq(g.heat(a, eps, t)) / g.norm_sq(a)) - 1)
        smoothing = -math.inf
        for t in (1e-3, 1e-2, 1e-1):
            bound = math.sqrt(1 + 1 / (2 * math.e * eps * t))
            for a in rng.standard_normal((100, g.n)):
                smoothing = max(smoothing, math.sqrt(g.norm_sq(g.heat(a, eps, t), 1) / g.norm_sq(a)) / bound - 1)
    ok = mode_err <= 1e-10 and growth <= 1e-12 and smoothing <= 1e-12 and clock.seconds < 5
    acceptance("C1 heat propagator", ok,
               f"mode rel err {mode_err:.2e} (<=1e-10), L2 growth {growth:.2e} (<=1e-12), "
               f"H1 bound excess {smoothing:.2e} (<=0), {clock.seconds:.2f}s (<5s)")
    assert ok


def test_c02_sx_norm(acceptance):
    rng = np.random.default_rng(1)
    with Timer() as clock:
        ux, lx = rng.standard_normal((2, 1000)) * rng.uniform(0.1, 10, (2, 1000))
        got = model.s_x_opnorm_from(ux, lx)
        oracle = np.array([np.max(np.abs(np.linalg.eigvalsh([[a, b / 2, 0], [b / 2, a, 0], [0, 0, a]])))
                           for a, b in zip(ux, lx)])
        err = float(np.max(np.abs(got - oracle)))
    ok = err <= 1e-12 and clock.seconds < 1
    acceptance("C2 S_x operator norm", ok, f"max err {err:.2e} (<=1e-12), {clock.seconds:.2f}s (<1s)")
    assert ok


def test_c03_energy_identity(acceptance):
    rng = np.random.default_rng(2)
    with Timer() as clock:
        g = Grid(128, 2 * np.pi * 4)
        p = Params()
        worst = max(energy_transfer_error(random_smooth_state(g, p, rng), p) for _ in range(100))
    ok = worst <= 1e-10 and clock.seconds < 5
    acceptance("C3 self-adjointness / energy identity", ok,
               f"max rel err {worst:.2e} (<=1e-10), {clock.seconds:.2f}s (<5s)")
    assert ok


def test_c04_entropy_dissipation(acceptance, entropy_runs):
    base, viscous, inviscid, seconds = entropy_runs
    p = Params(eps=1e-2)
    norms = [D.entropy_balance(o.mesh.times, o.mesh.states, p)[1] for o in viscous.values()]
    factors = [float(norms[i] / norms[i + 1]) for i in range(len(norms) - 1)]
    ent = D.column(inviscid.records, "entropy")
    drift = float(np.max(np.abs(ent - ent[0])) / ent[0])
    complete = all(o.status == "complete" for o in [*viscous.values(), inviscid])
    ok = complete and min(factors) >= 3.5 and drift <= 1e-6 and seconds < 60
    acceptance("C4 entropy dissipation", ok,
               f"residual factors {[round(f, 2) for f in factors]} (>=3.5), eps=0 drift {drift:.2e} (<=1e-6), "
               f"{seconds:.1f}s (<60s)")
    assert ok


def test_c05_eps_cauchy_rate(acceptance, eps_sweep):
    res, seconds = eps_sweep
    slope = res.fits["distance_vs_eps"]["slope"]
    ok = 0.8 <= slope <= 1.2 and seconds < 300
    acceptance("C5 eps-Cauchy rate", ok,
               f"slope of sup_t L2 distance vs eps {slope:.3f} (in [0.8, 1.2]); "
               f"slope vs eps - eps_ref {res.fits['distance_vs_gap']['slope']:.3f}, {seconds:.1f}s (<300s)")
    assert ok


def test_c05_supplement_gap_rate(acceptance, eps_sweep):
    """Distance against the gap to the reference viscosity, where D is linear."""
    res, _ = eps_sweep
    fit = res.fits["distance_vs_gap"]
    monotone = next(v for v in res.verdicts if v.name == "monotone").passed
    ok = 0.8 <= fit["slope"] <= 1.2 and monotone
    acceptance("C5 supplement: rate vs eps - eps_ref", ok,
               f"slope {fit['slope']:.4f} CI [{fit['ci_low']:.4f}, {fit['ci_high']:.4f}], D monotone {monotone}")
    assert ok


def test_c06_cross_solver(acceptance, cross_runs):
    cfg, g, p, m, ref, seconds = cross_runs
    d = float(np.sqrt(np.max(np.sum((ref.mesh.data - m.data) ** 2, axis=(1, 2)) * g.dx)))
    ok = m.status == "complete" and ref.status == "complete" and d <= 1e-5 and seconds < 180
    acceptance("C6 cross-solver agreement", ok,
               f"sup_t L2 distance {d:.2e} (<=1e-5) over {len(m.windows)} windows, {seconds:.1f}s (<180s)")
    assert ok


def test_c07_small_data_global(acceptance, small_data_study):
    res, seconds = small_data_study
    r = res.runs[0]
    delta = r["delta"]
    ok = (r["status"] == "complete" and r["max_l2"] <= 3 * delta and r["max_vx_l2"] <= math.sqrt(delta)
          and r["energy_ok"] and r["min_energy_margin"] >= 0 and seconds < 300)
    acceptance("C7 small-data global regime", ok,
               f"max L2 {r['max_l2']:.2e} (<=3e-3), max ||V_x|| {r['max_vx_l2']:.2e} (<=3.16e-2), "
               f"min energy margin {r['min_energy_margin']:.2e} (>=0), {seconds:.1f}s (<300s)")
    assert ok


def test_c08_existence_time_scaling(acceptance, t0_study):
    res, seconds = t0_study
    fit = res.fits["T2_vs_amplitude"]
    used = [r for r in res.runs if not r["excluded"]]
    ok = len(used) == 3 and abs(fit["slope"] + 1) <= 0.3 and seconds < 300
    acceptance("C8 existence-time scaling", ok,
               f"slope {fit['slope']:.3f} (-1 +/- 0.3), T2 {[round(r['T2'], 3) for r in used]}, "
               f"{seconds:.1f}s (<300s)")
    assert ok


def test_c09_positivity_and_log_h(acceptance, entropy_runs, cross_runs, small_data_study, t0_study):
    base, viscous, inviscid, _ = entropy_runs
    cfg, g, p, m, ref, _ = cross_runs
    meshes = [(o.mesh, base.params.g, base.params.h_bar) for o in [*viscous.values(), inviscid]]
    meshes += [(m, p.g, p.h_bar), (ref.mesh, p.g, p.h_bar)]
    worst_min_h, worst_excess, checked = math.inf, -math.inf, 0
    ok = True
    for mesh, grav, hb in meshes:
        rep = D.positivity_monitor(mesh.times, D.phys_traj(mesh, grav), hb)
        worst_min_h = min(worst_min_h, float(rep.min_h.min()))
        scale = np.maximum(rep.envelope, 1e-300)
        worst_excess = max(worst_excess, float(np.max(rep.log_h_h1 / scale)) - 1)
        ok &= rep.passed
        checked += 1
    study_runs = [*small_data_study[0].runs, *t0_study[0].runs]
    ok &= all(r["positivity_ok"] for r in study_runs)
    worst_min_h = min(worst_min_h, *(r.get("min_h", math.inf) for r in t0_study[0].runs))
    ok &= worst_min_h > 0
    acceptance("C9 positivity and ln h bound", ok,
               f"{checked + len(study_runs)} runs, min h {worst_min_h:.3f} (>0), "
               f"max ||ln h||/envelope - 1 = {worst_excess:.3f} (<=0.05)")
    assert ok


def test_c10_regularity_equivalence(acceptance):
    with Timer() as clock:
        g = Grid(256, 2 * np.pi)
        hb = 1.0
        finite, pointwise, fwd0 = True, True, 0.0
        for A in (0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5):
            h = hb * (1 + A * np.sin(g.x))
            for m in (0, 1, 2):
                fwd, bwd = D.regularity_equivalence(h, hb, m, grid=g)
                finite &= math.isfinite(fwd) and math.isfinite(bwd) and fwd > 0 and bwd > 0
                if m == 0:
                    pointwise &= all(D.sqrt_pointwise_bounds(h, hb)) and fwd <= 1 / math.sqrt(hb)
                    fwd0 = max(fwd0, fwd)
    ok = finite and pointwise and clock.seconds < 5
    acceptance("C10 regularity equivalence", ok,
               f"ratios finite {finite}, m=0 pointwise bounds {pointwise}, max m=0 ratio {fwd0:.3f} "
               f"(<=1/sqrt(h_bar)), {clock.seconds:.2f}s (<5s)")
    assert ok

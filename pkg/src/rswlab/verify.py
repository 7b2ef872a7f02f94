"""Property checks behind ``rsw verify``.

Each check runs at a small fixed size and returns a :class:`Check` with
the measured margin.  Module attributes are looked up at call time so a
patched implementation (e.g. a sign error in the Coriolis term) is what
gets checked.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import diagnostics, grid as gs, lines, mild, model
from .experiments import make_initial_data
from .grid import Grid
from .model import CoriolisProfile, Params, State3


@dataclass
class Check:
    name: str
    passed: bool
    measured: float
    limit: float
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag}  {self.name:<40s} measured={self.measured:.3e} limit={self.limit:.3e} ({self.seconds:.2f}s)"


def random_smooth_fields(grid: Grid, rng, count: int, kmax: int | None = None, amp: float = 1.0) -> np.ndarray:
    """Real fields with random Fourier modes |j| <= kmax (default n/8), shape (count, n)."""
    kmax = grid.n // 8 if kmax is None else kmax
    coeffs = np.zeros((count, grid.n // 2 + 1), dtype=complex)
    coeffs[:, : kmax + 1] = rng.standard_normal((count, kmax + 1)) + 1j * rng.standard_normal((count, kmax + 1))
    coeffs[:, 0] = coeffs[:, 0].real
    out = grid.irfft(coeffs)
    return amp * out / np.max(np.abs(out), axis=-1, keepdims=True)


def random_smooth_state(grid: Grid, p: Params, rng, amp: float = 0.1, kmax: int | None = None) -> State3:
    w = random_smooth_fields(grid, rng, 3, kmax, 1.0)
    lam = p.lambda_bar * (1 + amp * w[0])
    c = p.lambda_bar / 2
    return State3.from_components(grid, lam, amp * c * w[1], amp * c * w[2])


def _timed(fn):
    def wrapper(*a, **k):
        t0 = time.perf_counter()
        chk = fn(*a, **k)
        chk.seconds = time.perf_counter() - t0
        return chk

    wrapper.__name__ = fn.__name__
    return wrapper


@_timed
def check_parseval(rng) -> Check:
    g = Grid(64, 3.0)
    f = gs.Field(g, rng.standard_normal(g.n))
    s = gs.to_spectrum(f)
    lhs = np.sum(f.values**2) * g.dx
    rhs = g.length * np.sum(np.abs(s.coeffs) ** 2)
    err = abs(lhs - rhs) / lhs
    return Check("grid.parseval", err <= 1e-12, err, 1e-12)


@_timed
def check_heat_semigroup(rng) -> Check:
    g = Grid(128, 2 * np.pi)
    f = gs.Field(g, random_smooth_fields(g, rng, 1, g.n // 2)[0])
    a = gs.heat_propagate(f, 0.1, 0.3).values
    b = gs.heat_propagate(gs.heat_propagate(f, 0.1, 0.1), 0.1, 0.2).values
    err = float(np.max(np.abs(a - b)) / np.max(np.abs(a)))
    return Check("grid.heat_semigroup_law", err <= 1e-12, err, 1e-12)


@_timed
def check_heat_contraction(rng) -> Check:
    g = Grid(64, 2 * np.pi)
    f = rng.standard_normal((200, g.n))
    worst = -math.inf
    for t in (1e-3, 1e-2, 1e-1):
        out = g.heat(f, 1.0, t)
        before = np.sqrt(np.sum(f**2, axis=-1))
        after = np.sqrt(np.sum(out**2, axis=-1))
        worst = max(worst, float(np.max(after / before - 1)))
    return Check("grid.heat_nonexpansive", worst <= 1e-12, worst, 1e-12)


@_timed
def check_heat_smoothing(rng) -> Check:
    g = Grid(64, 2 * np.pi)
    eps = 1.0
    worst = -math.inf
    for t in (1e-3, 1e-2, 1e-1):
        bound = math.sqrt(1 + 1 / (2 * math.e * eps * t))
        for f in rng.standard_normal((50, g.n)):
            ratio = math.sqrt(g.norm_sq(g.heat(f, eps, t), 1) / g.norm_sq(f, 0))
            worst = max(worst, ratio / bound - 1)
    return Check("grid.heat_h1_smoothing", worst <= 1e-12, worst, 1e-12)


@_timed
def check_self_adjoint(rng) -> Check:
    g = Grid(64, 10.0)
    p = Params()
    worst = 0.0
    for _ in range(20):
        V = random_smooth_state(g, p, rng, kmax=g.n // 2)
        W = State3(g, rng.standard_normal((3, g.n)))
        Z = State3(g, rng.standard_normal((3, g.n)))
        a = g.inner(model.apply_S(V, W).data, Z.data)
        b = g.inner(W.data, model.apply_S(V, Z).data)
        worst = max(worst, abs(a - b) / max(abs(a), 1e-300))
    return Check("model.S_self_adjoint", worst <= 1e-12, worst, 1e-12)


def energy_transfer_error(V: State3, p: Params) -> float:
    """Relative mismatch of <V-E, -2 S(V) V_x> and <V-E, S_x (V-E)>."""
    g = V.grid
    w = State3(g, V.data - State3.rest(g, p).data)
    vx = State3(g, g.diff(V.data))
    lhs = -2 * g.inner(w.data, model.apply_S(V, vx).data)
    rhs = g.inner(w.data, model.apply_S_x(V, w).data)
    return abs(lhs - rhs) / max(abs(rhs), 1e-300)


@_timed
def check_energy_identity(rng) -> Check:
    g = Grid(128, 20.0)
    p = Params()
    worst = max(energy_transfer_error(random_smooth_state(g, p, rng, kmax=g.n // 8), p) for _ in range(20))
    return Check("model.energy_transfer_identity", worst <= 1e-10, worst, 1e-10)


@_timed
def check_sx_norm(rng) -> Check:
    ux, lx = rng.standard_normal((2, 1000)) * 3
    M = np.zeros((1000, 3, 3))
    M[:, 0, 0] = M[:, 1, 1] = M[:, 2, 2] = ux
    M[:, 0, 1] = M[:, 1, 0] = lx / 2
    oracle = np.max(np.abs(np.linalg.eigvalsh(M)), axis=-1)
    err = float(np.max(np.abs(model.s_x_opnorm_from(ux, lx) - oracle) / np.maximum(oracle, 1)))
    return Check("model.S_x_operator_norm", err <= 1e-12, err, 1e-12)


@_timed
def check_char_speeds(rng) -> Check:
    g = Grid(16, 1.0)
    V = random_smooth_state(g, Params(), rng, amp=0.5, kmax=4)
    M = np.zeros((g.n, 3, 3))
    M[:, 0, 0] = M[:, 1, 1] = M[:, 2, 2] = V.u
    M[:, 0, 1] = M[:, 1, 0] = V.lam / 2
    oracle = np.linalg.eigvalsh(M)
    mine = np.sort(np.stack(model.char_speeds(V), axis=-1), axis=-1)
    err = float(np.max(np.abs(mine - oracle)))
    return Check("model.char_speeds_are_eigenvalues", err <= 1e-12, err, 1e-12)


@_timed
def check_roundtrip(rng) -> Check:
    g = Grid(32, 1.0)
    p = Params()
    V = random_smooth_state(g, p, rng, amp=0.3)
    back = model.symmetrize(model.desymmetrize(V, p.g), p.g)
    err = float(np.max(np.abs(back.data - V.data) / np.abs(V.data).max()))
    return Check("model.symmetrize_roundtrip", err <= 1e-13, err, 1e-13)


@_timed
def check_coriolis_orthogonal(rng) -> Check:
    g = Grid(64, 10.0)
    p = Params()
    cor = CoriolisProfile.sinusoidal(g, 1.0, 0.5)
    E = State3.rest(g, p)
    worst = 0.0
    for _ in range(10):
        V = random_smooth_state(g, p, rng, kmax=g.n // 8)
        c = model.coriolis_term(V, E, cor).data
        w = V.data - E.data
        worst = max(worst, float(np.max(np.abs(np.sum(c * w, axis=0)))) / float(np.max(np.sum(w * w, axis=0))))
    return Check("model.coriolis_orthogonality", worst <= 1e-10, worst, 1e-10)


@_timed
def check_hessian_fd(rng) -> Check:
    # The stencil is evaluated in extended precision: with h = 1e-5 the
    # double-precision cancellation error alone is of order 1e-6.
    lb = np.longdouble(2.0)
    worst = 0.0
    h = np.longdouble(1e-5)
    eye = np.eye(3, dtype=np.longdouble)
    for _ in range(100):
        x = np.array([2.0 * (1 + 0.3 * rng.standard_normal()), *rng.standard_normal(2)], dtype=np.longdouble)
        H = diagnostics.entropy_hessian(*x.astype(float), float(lb))
        fd = np.zeros((3, 3), dtype=np.longdouble)
        for i in range(3):
            for j in range(3):
                ei, ej = eye[i] * h, eye[j] * h
                f = lambda y: diagnostics.entropy_density_pointwise(*y, lb)  # noqa: E731
                fd[i, j] = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)) / (4 * h * h)
        worst = max(worst, float(np.max(np.abs(fd - H))))
    return Check("diagnostics.hessian_vs_finite_difference", worst <= 1e-6, worst, 1e-6)


@_timed
def check_interpolation(rng) -> Check:
    g = Grid(64, 2 * np.pi)
    p = Params()
    E = State3.rest(g, p)
    worst = math.inf
    for _ in range(200):
        V = random_smooth_state(g, p, rng, kmax=int(rng.integers(1, g.n // 2)))
        ok, slack = diagnostics.interpolation_check(V, E)
        worst = min(worst, slack)
    return Check("diagnostics.interpolation_inequality", worst >= -1e-12, worst, 0.0)


def _small_run(eps, dt, T=0.5, n=64, f1=0.5):
    g = Grid(n, 2 * np.pi * 4)
    p = Params(eps=eps)
    cor = CoriolisProfile.sinusoidal(g, 1.0, f1)
    V0 = model.symmetrize(make_initial_data("gaussian_bump", 0.05, 2.0, g, p), p.g)
    res = lines.integrate(V0, lines.StepControl(T, dt_max=dt), p, cor)
    return g, p, cor, res


@_timed
def check_mass_conservation(rng) -> Check:
    g, p, _, res = _small_run(0.0, 0.01, T=1.0)
    total = diagnostics.column(res.records, "mass") + p.h_bar * g.length
    drift = float(np.max(np.abs(total - total[0])) / total[0])
    return Check("lines.mass_conservation_eps0", drift <= 1e-8, drift, 1e-8)


@_timed
def check_symmetrized_mass_balance(rng) -> Check:
    g, p, _, res = _small_run(5e-2, 0.005, T=0.5)
    mesh = res.mesh
    mass = np.array([np.sum(mesh.data[i, 0] ** 2) * g.dx / (4 * p.g) for i in range(len(mesh))])
    rate = np.array([-p.eps / (2 * p.g) * g.seminorm_sq(mesh.data[i, 0], 1) for i in range(len(mesh))])
    r = diagnostics.time_derivative(mesh.times, mass) - rate
    err = float(np.max(np.abs(r)) / np.max(np.abs(rate)))
    return Check("lines.symmetrized_mass_balance", err <= 1e-2, err, 1e-2)


@_timed
def check_temporal_order(rng) -> Check:
    # eps large enough that the splitting error dominates the RK4 error
    dts = (0.02, 0.01, 0.005)
    finals = [_small_run(0.5, dt, T=0.4)[3].mesh.data[-1] for dt in dts]
    d1 = np.linalg.norm(finals[0] - finals[1])
    d2 = np.linalg.norm(finals[1] - finals[2])
    order = math.log2(d1 / d2)
    return Check("lines.strang_order", abs(order - 2) <= 0.2, order, 2.0)


@_timed
def check_entropy_eps0(rng) -> Check:
    g, p, _, res = _small_run(0.0, 0.005, T=0.5)
    ent = diagnostics.column(res.records, "entropy")
    drift = float(np.max(np.abs(ent - ent[0])) / ent[0])
    return Check("diagnostics.entropy_conserved_eps0", drift <= 1e-6, drift, 1e-6)


@_timed
def check_l2_balance(rng) -> Check:
    g, p, _, res = _small_run(5e-2, 0.01, T=1.0)
    ok = diagnostics.l2_energy_inequality(list(zip(res.mesh.times, res.mesh.states)), p)
    return Check("diagnostics.l2_energy_inequality", bool(ok.all()), float((~ok).sum()), 0.0)


@_timed
def check_mild_fixed_point(rng) -> Check:
    g = Grid(32, 2 * np.pi * 4)
    p = Params(eps=5e-2)
    cor = CoriolisProfile.constant(g, 1.0)
    V0 = model.symmetrize(make_initial_data("gaussian_bump", 0.05, 2.0, g, p), p.g)
    traj, rep = mild.solve_window(V0, 0.01, 1e-11, 50, p, cor, nodes=16)
    again = mild.duhamel_map(traj, V0, p, cor)
    zero = State3(g, np.zeros((3, g.n)))
    resid = max(gs.n_norm(State3(g, again.data[i] - traj.data[i]), zero) for i in range(len(traj)))
    ok = rep.converged and resid <= 1e-10 and np.array_equal(traj.data[0], V0.data)
    return Check("mild.fixed_point_residual", ok, resid, 1e-10)


CHECKS = [
    check_parseval,
    check_heat_semigroup,
    check_heat_contraction,
    check_heat_smoothing,
    check_self_adjoint,
    check_energy_identity,
    check_sx_norm,
    check_char_speeds,
    check_roundtrip,
    check_coriolis_orthogonal,
    check_hessian_fd,
    check_interpolation,
    check_mass_conservation,
    check_symmetrized_mass_balance,
    check_temporal_order,
    check_entropy_eps0,
    check_l2_balance,
    check_mild_fixed_point,
]


def run_checks(seed: int = 0) -> list[Check]:
    rng = np.random.default_rng(seed)
    out = []
    for fn in CHECKS:
        try:
            out.append(fn(rng))
        except Exception as exc:  # a crashing check is a failing check
            out.append(Check(f"{fn.__name__} raised {type(exc).__name__}: {exc}", False, math.nan, math.nan))
    return out

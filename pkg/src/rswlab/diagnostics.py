"""Norms, entropy identities, stopping times and a-priori bounds on trajectories.

Each function turns one of the estimates of the existence theory into a
quantity that can be evaluated on sampled numerical states.
"""
from __future__ import annotations

import math
from dataclasses import astuple, dataclass, fields

import numpy as np

from .errors import NonPositiveHeight
from .grid import Grid, h2_norm, n_norm
from .model import CoriolisProfile, Params, PhysState, State3, desymmetrize, s_x_opnorm

RECORD_COLUMNS = (
    "t",
    "l2_dist",
    "h1_dist",
    "n_norm",
    "sup_vx",
    "entropy",
    "dissipation",
    "min_h",
    "mass",
    "log_h_h1",
    "hessian_min_eig",
    # trailing extras used by the stopping times
    "h2_dist",
    "vx_l2",
)


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    l2_dist: float
    h1_dist: float
    n_norm: float
    sup_vx: float
    entropy: float
    dissipation: float
    min_h: float
    mass: float
    log_h_h1: float
    hessian_min_eig: float
    h2_dist: float
    vx_l2: float

    def as_tuple(self) -> tuple:
        return astuple(self)

    def is_finite(self) -> bool:
        return all(math.isfinite(x) for x in astuple(self))


assert tuple(f.name for f in fields(DiagnosticsRecord)) == RECORD_COLUMNS


# -- entropy pair -------------------------------------------------------------


def entropy_density(V: State3, lambda_bar: float) -> np.ndarray:
    lam, u, v = V.data
    return entropy_density_pointwise(lam, u, v, lambda_bar)


def entropy_density_pointwise(lam, u, v, lambda_bar):
    lam2 = np.asarray(lam) ** 2
    return lam2 / 8 * (u**2 + v**2) + 0.5 * ((lam2 - lambda_bar**2) / 4) ** 2


def entropy_flux(V: State3, lambda_bar: float) -> np.ndarray:
    lam, u, v = V.data
    lam2 = lam**2
    return lam2 * u / 8 * (u**2 + v**2) + lam2 * u / 4 * ((lam2 - lambda_bar**2) / 4)


def entropy_hessian(lam, u, v, lambda_bar):
    """Hessian of the entropy density; returns shape (..., 3, 3)."""
    lam, u, v = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (lam, u, v)))
    H = np.zeros(lam.shape + (3, 3))
    H[..., 0, 0] = (u**2 + v**2) / 4 + 3 * lam**2 / 8 - lambda_bar**2 / 8
    H[..., 0, 1] = H[..., 1, 0] = lam * u / 2
    H[..., 0, 2] = H[..., 2, 0] = lam * v / 2
    H[..., 1, 1] = H[..., 2, 2] = lam**2 / 4
    return H


def hessian_eigenvalues(lam, u, v, lambda_bar):
    """Closed-form eigenvalues of the entropy Hessian, ascending, shape (..., 3).

    The matrix is [[a, b, c], [b, d, 0], [c, 0, d]]: (0, c, -b) is an
    eigenvector for d and the rest reduces to [[a, r], [r, d]] with
    r = sqrt(b^2 + c^2).
    """
    lam, u, v = (np.asarray(x, dtype=float) for x in (lam, u, v))
    a = (u**2 + v**2) / 4 + 3 * lam**2 / 8 - lambda_bar**2 / 8
    d = lam**2 / 4
    r = np.abs(lam) / 2 * np.sqrt(u**2 + v**2)
    mid = (a + d) / 2
    rad = np.hypot((a - d) / 2, r)
    return np.sort(np.stack(np.broadcast_arrays(mid - rad, d, mid + rad), axis=-1), axis=-1)


def hessian_coercivity(V: State3, lambda_bar: float) -> float:
    """Smallest eigenvalue of the entropy Hessian over the grid."""
    return float(np.min(hessian_eigenvalues(V.lam, V.u, V.v, lambda_bar)[..., 0]))


def dissipation_density(V: State3, lambda_bar: float) -> np.ndarray:
    """V_x . eta''(V) V_x pointwise."""
    vx = V.grid.diff(V.data)
    H = entropy_hessian(V.lam, V.u, V.v, lambda_bar)
    return np.einsum("ix,xij,jx->x", vx, H, vx)


def total_entropy(V: State3, lambda_bar: float) -> float:
    return float(np.sum(entropy_density(V, lambda_bar)) * V.grid.dx)


def total_dissipation(V: State3, p: Params) -> float:
    return float(p.eps * np.sum(dissipation_density(V, p.lambda_bar)) * V.grid.dx)


# -- records ------------------------------------------------------------------


def log_height_h1(lam: np.ndarray, grid: Grid, lambda_bar: float) -> float:
    """||ln(h / h_bar)||_{H1}, using ln(h/h_bar) = 2 ln(lam/lam_bar)."""
    ell = 2.0 * np.log(lam / lambda_bar)
    return float(np.sqrt(grid.norm_sq(ell, 1)))


def make_record(t: float, V: State3, p: Params) -> DiagnosticsRecord:
    g = V.grid
    E = State3.rest(g, p)
    w = V.data - E.data
    vx = g.diff(V.data)
    lam_min = float(np.min(V.lam))
    h = V.lam**2 / (4 * p.g)
    l2sq = g.norm_sq(w, 0)
    vxsq = g.seminorm_sq(V.data, 1)
    return DiagnosticsRecord(
        t=float(t),
        l2_dist=math.sqrt(l2sq),
        h1_dist=math.sqrt(g.norm_sq(w, 1)),
        n_norm=n_norm(V, E),
        sup_vx=float(np.max(np.sqrt(np.sum(vx**2, axis=0)))),
        entropy=total_entropy(V, p.lambda_bar),
        dissipation=total_dissipation(V, p),
        min_h=float(np.min(h)),
        mass=float(np.sum(h - p.h_bar) * g.dx),
        log_h_h1=log_height_h1(V.lam, g, p.lambda_bar) if lam_min > 0 else math.nan,
        hessian_min_eig=hessian_coercivity(V, p.lambda_bar),
        h2_dist=h2_norm(V, E),
        vx_l2=math.sqrt(vxsq),
    )


def records_array(records) -> np.ndarray:
    if not records:
        return np.empty((0, len(RECORD_COLUMNS)))
    return np.array([r.as_tuple() for r in records], dtype=float)


def column(records, name: str) -> np.ndarray:
    return np.array([getattr(r, name) for r in records], dtype=float)


# -- time derivatives on sample meshes ----------------------------------------


def time_derivative(times, y) -> np.ndarray:
    """Second-order finite-difference d/dt on a (possibly non-uniform) mesh.

    Interior points use the three-point centered formula, end points the
    one-sided three-point stencil.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(t) < 3:
        raise ValueError("need at least 3 samples for a second-order time derivative")
    return np.gradient(y, t, axis=0, edge_order=2)


def entropy_balance(times, states, p: Params):
    """Residual of d/dt int(eta) + eps int(V_x . eta'' V_x) along sampled states.

    Returns
    -------
    residual : array over samples
    normalized : max |residual| / max dissipation (or the raw max when
        there is no dissipation)
    """
    states = list(states)
    if len(states) < 3:
        raise ValueError("entropy balance needs at least 3 samples")
    ent = np.array([total_entropy(V, p.lambda_bar) for V in states])
    dis = np.array([total_dissipation(V, p) for V in states])
    r = time_derivative(times, ent) + dis
    scale = np.max(np.abs(dis))
    peak = float(np.max(np.abs(r)))
    return r, (peak / scale if scale > 0 else peak)


# -- stopping times and a-priori bounds ---------------------------------------


def stopping_times(records, M0: float, delta: float):
    """(tau, T_delta): first sample times where the thresholds are crossed.

    tau uses ||V - E||_{H2} > 2 M0; T_delta uses
    max(||V - E||_{L2}, ||V_x||_{L2}) > sqrt(delta).  ``None`` means the
    threshold was not crossed within the records.
    """
    tau = T_delta = None
    root = math.sqrt(delta)
    for r in records:
        if tau is None and r.h2_dist > 2 * M0:
            tau = r.t
        if T_delta is None and max(r.l2_dist, r.vx_l2) > root:
            T_delta = r.t
    return tau, T_delta


def _trapz_cumulative(t, y):
    out = np.zeros_like(y, dtype=float)
    if len(t) > 1:
        out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))
    return out


def energy_inequality_check(records, p: Params, delta: float):
    """||V - E||^2 + 4 eps int_0^t ||V_x||^2 <= 9 delta^2 up to T_delta.

    Returns (passed, margins) with margins = 9 delta^2 - LHS per sample.
    """
    _, T_delta = stopping_times(records, math.inf, delta)
    recs = [r for r in records if T_delta is None or r.t <= T_delta]
    if not recs:
        return True, np.empty(0)
    t = column(recs, "t")
    lhs = column(recs, "l2_dist") ** 2 + 4 * p.eps * _trapz_cumulative(t, column(recs, "vx_l2") ** 2)
    margins = 9 * delta**2 - lhs
    return bool(np.all(margins >= 0)), margins


def vx_growth_rhs(vx_l2, eps: float, delta: float, sup_fx: float):
    """Right side of d/dt ||V_x||^2 <= 3/(2 (4 eps)^(1/3)) ||V_x||^(10/3) + 6 delta ||f'|| ||V_x||."""
    vx_l2 = np.asarray(vx_l2, dtype=float)
    return 1.5 / (4 * eps) ** (1 / 3) * vx_l2 ** (10 / 3) + 6 * delta * sup_fx * vx_l2


def vx_growth_bound(records, p: Params, delta: float, cor: CoriolisProfile | None, rel_tol: float = 0.05):
    """Check each sample-to-sample increment of ||V_x||^2 against the integrated bound.

    Returns a boolean array over intervals (True = satisfied).
    """
    if p.eps <= 0:
        raise ValueError("the V_x growth bound needs eps > 0")
    t = column(records, "t")
    vx = column(records, "vx_l2")
    rhs = vx_growth_rhs(vx, p.eps, delta, 0.0 if cor is None else cor.sup_fx)
    incr = np.diff(vx**2)
    allowed = 0.5 * (rhs[1:] + rhs[:-1]) * np.diff(t)
    # absolute slack covers rounding of ||V_x||^2 itself
    slack = rel_tol * allowed + 64 * np.finfo(float).eps * np.maximum(vx[1:] ** 2, vx[:-1] ** 2)
    return incr <= allowed + slack


def l2_energy_inequality(records, p: Params, rel_tol: float = 0.05):
    """Sample-to-sample check of d/dt||V-E||^2 + 2 eps ||V_x||^2 <= |||S_x||| ||V-E||^2.

    Needs the per-sample sup of the S_x operator norm, so takes
    ``(t, V)`` pairs instead of records.
    """
    t = np.array([s[0] for s in records])
    states = [s[1] for s in records]
    E = State3.rest(states[0].grid, p)
    g = states[0].grid
    l2 = np.array([g.norm_sq(V.data - E.data, 0) for V in states])
    vx = np.array([g.seminorm_sq(V.data, 1) for V in states])
    sx = np.array([float(np.max(s_x_opnorm(V))) for V in states])
    lhs = np.diff(l2) + p.eps * (vx[1:] + vx[:-1]) * np.diff(t)
    rhs = 0.5 * (sx[1:] * l2[1:] + sx[:-1] * l2[:-1]) * np.diff(t)
    return lhs <= rhs * (1 + rel_tol) + 64 * np.finfo(float).eps * l2[1:]


def interpolation_check(V: State3, E: State3):
    """||V_x||^2 <= ||V_xx|| ||V - E||.  Returns (passed, slack)."""
    g = V.grid
    lhs = g.seminorm_sq(V.data, 1)
    rhs = math.sqrt(g.seminorm_sq(V.data, 2) * g.norm_sq(V.data - E.data, 0))
    slack = rhs - lhs
    return slack >= -1e-12 * max(rhs, 1e-300), slack


# -- positivity and regularity -------------------------------------------------


@dataclass
class PositivityReport:
    times: np.ndarray
    min_h: np.ndarray
    max_h: np.ndarray
    log_h_h1: np.ndarray
    envelope: np.ndarray
    violations: np.ndarray

    @property
    def alpha(self) -> float:
        """Largest alpha with alpha <= h <= 1/alpha on the recorded samples."""
        return min(float(np.min(self.min_h)), 1 / float(np.max(self.max_h)))

    @property
    def passed(self) -> bool:
        return not bool(np.any(self.violations))


def positivity_monitor(times, traj, h_bar: float, alpha_floor: float = 0.0, rel_tol: float = 0.05) -> PositivityReport:
    """Track min h, ||ln(h/h_bar)||_{H1} and its Gronwall envelope.

    The envelope integrates d/dt y = ||u_x||_inf y + 2 ||u_x||_{H1} with
    explicit Euler on the sample mesh, starting from the measured initial
    norm.  A sample is flagged if the measured norm exceeds the envelope by
    more than ``rel_tol``.
    """
    times = np.asarray(times, dtype=float)
    traj = list(traj)
    grid = traj[0].grid
    min_h = np.array([float(np.min(s.h)) for s in traj])
    if np.any(min_h <= alpha_floor):
        i = int(np.argmax(min_h <= alpha_floor))
        raise NonPositiveHeight(f"min h = {min_h[i]:.3e} <= {alpha_floor} at t = {times[i]}")
    logn = np.array([math.sqrt(grid.norm_sq(np.log(s.h / h_bar), 1)) for s in traj])
    ux_inf = np.array([float(np.max(np.abs(grid.diff(s.u)))) for s in traj])
    ux_h1 = np.array([math.sqrt(grid.norm_sq(grid.diff(s.u), 1)) for s in traj])
    env = np.empty_like(logn)
    env[0] = logn[0]
    for i in range(1, len(times)):
        dt = times[i] - times[i - 1]
        env[i] = env[i - 1] + dt * (ux_inf[i - 1] * env[i - 1] + 2 * ux_h1[i - 1])
    violations = logn > env * (1 + rel_tol) + 1e-12
    max_h = np.array([float(np.max(s.h)) for s in traj])
    return PositivityReport(times, min_h, max_h, logn, env, violations)


def regularity_equivalence(h, h_bar: float, m: int, grid: Grid | None = None):
    """Ratios ||sqrt h - sqrt h_bar||_{Hm} / ||h - h_bar||_{Hm} and the reciprocal.

    ``h`` may be a Field or an array (then ``grid`` is required).  Both
    ratios are reported as 1 when h == h_bar.
    """
    if grid is None:
        grid, h = h.grid, h.values
    h = np.asarray(h, dtype=float)
    if np.min(h) <= 0:
        raise NonPositiveHeight(f"min h = {np.min(h):.3e} <= 0")
    a = math.sqrt(grid.norm_sq(h - h_bar, m))
    b = math.sqrt(grid.norm_sq(np.sqrt(h) - math.sqrt(h_bar), m))
    if a == 0 and b == 0:
        return 1.0, 1.0
    return b / a, a / b


def sqrt_pointwise_bounds(h, h_bar: float) -> tuple[bool, bool]:
    """The two pointwise bounds behind the L2 equivalence of h - h_bar and sqrt h - sqrt h_bar.

    |sqrt h - sqrt h_bar| <= |h - h_bar| / sqrt h_bar  and
    |h - h_bar| <= |sqrt h - sqrt h_bar| (sqrt h_bar + ||sqrt h||_inf).
    """
    h = np.asarray(getattr(h, "values", h), dtype=float)
    d = np.abs(h - h_bar)
    s = np.abs(np.sqrt(h) - math.sqrt(h_bar))
    tol = 1e-14 * max(h_bar, float(np.max(h)))
    first = bool(np.all(s <= d / math.sqrt(h_bar) + tol))
    second = bool(np.all(d <= s * (math.sqrt(h_bar) + float(np.max(np.sqrt(h)))) + tol))
    return first, second


def phys_traj(mesh, g: float) -> list[PhysState]:
    return [desymmetrize(mesh.state(i), g) for i in range(len(mesh))]

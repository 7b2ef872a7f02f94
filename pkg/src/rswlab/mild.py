"""Mild solutions by Picard iteration of the Duhamel map.

On a window [0, T] the map

    T(V)(t) = E + W(t)(V0 - E) + int_0^t W(t - s) N(V(s)) ds,
    N(V) = -S(V) V_x - F x (V - E),

is evaluated on a uniform mesh with the heat semigroup W applied exactly
in Fourier space and the s-integral done by the composite trapezoid rule.
Iterating it from the constant-in-time guess gives the window solution;
chaining windows gives the continuation.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import model
from .errors import BlowupSuspected, NotContracting
from .grid import n_norm
from .model import CoriolisProfile, Params, State3
from .trajectory import TrajectoryMesh

log = logging.getLogger(__name__)


@dataclass
class FixedPointReport:
    iterations: int = 0
    distances: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    converged: bool = False
    window: float = 0.0

    @property
    def contraction_ratio(self) -> float:
        """Largest observed ratio (nan before two iterations)."""
        finite = [r for r in self.ratios if math.isfinite(r)]
        return max(finite) if finite else math.nan


def _trapezoid_heat_weights(times, eps: float, rk):
    """Weights w[i, j, k] so that sum_j w[i, j] N_hat[j] ~ int_0^{t_i} W(t_i - s) N(s) ds."""
    t = np.asarray(times)
    m = len(t)
    dt = np.diff(t)
    w = np.zeros((m, m))
    for i in range(1, m):
        w[i, :i] += 0.5 * dt[:i]
        w[i, 1 : i + 1] += 0.5 * dt[:i]
    lag = np.clip(t[:, None] - t[None, :], 0.0, None)
    return w[:, :, None] * np.exp(-eps * lag[:, :, None] * rk[None, None, :] ** 2)


def duhamel_map(
    traj: TrajectoryMesh,
    V0: State3,
    p: Params,
    cor: CoriolisProfile | None,
    *,
    advection: bool = True,
    _weights=None,
) -> TrajectoryMesh:
    """One application of the Duhamel map on the nodes of ``traj``."""
    g = traj.grid
    E = State3.rest(g, p)
    times = traj.times - traj.times[0]
    weights = _weights if _weights is not None else _trapezoid_heat_weights(times, p.eps, g.rk)
    nonlin = np.array([model.hyperbolic_rhs(traj.state(i), E, cor, advection=advection).data for i in range(len(traj))])
    nhat = g.rfft(nonlin)  # (m, 3, nk)
    w0hat = g.rfft(V0.data - E.data)
    free = w0hat[None, :, :] * g.heat_factor(p.eps, times)[:, None, :]
    forced = np.einsum("ijk,jck->ick", weights, nhat)
    out = E.data[None] + g.irfft(free + forced)
    out[0] = V0.data
    return TrajectoryMesh(g, traj.times.copy(), out)


def _sup_distance(a: TrajectoryMesh, b: TrajectoryMesh) -> float:
    g = a.grid
    zero = State3(g, np.zeros((3, g.n)))
    return max(n_norm(State3(g, a.data[i] - b.data[i]), zero) for i in range(len(a)))


def solve_window(
    V0: State3,
    T: float,
    tol: float,
    max_iter: int,
    p: Params,
    cor: CoriolisProfile | None,
    *,
    nodes: int = 32,
    t0: float = 0.0,
) -> tuple[TrajectoryMesh, FixedPointReport]:
    """Picard iteration of the Duhamel map on [t0, t0 + T] with ``nodes`` intervals.

    Raises NotContracting when the successive-distance ratio exceeds 1 on
    three consecutive iterations (or the iterates stop being finite).
    """
    if not T > 0:
        raise ValueError(f"window length must be positive, got {T}")
    if not tol > 0:
        raise ValueError(f"tolerance must be positive, got {tol}")
    times = t0 + np.linspace(0.0, T, nodes + 1)
    traj = TrajectoryMesh.constant(V0, times)
    weights = _trapezoid_heat_weights(times - t0, p.eps, V0.grid.rk)
    report = FixedPointReport(window=T)
    growing = 0
    for it in range(1, max_iter + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            new = duhamel_map(traj, V0, p, cor, _weights=weights)
            dist = _sup_distance(new, traj)
        report.iterations = it
        report.distances.append(dist)
        if not math.isfinite(dist):
            raise NotContracting(f"iterates diverged on window T={T:.3e}")
        if len(report.distances) > 1:
            prev = report.distances[-2]
            ratio = dist / prev if prev > 0 else 0.0
            report.ratios.append(ratio)
            growing = growing + 1 if ratio > 1 else 0
            if growing >= 3:
                raise NotContracting(f"contraction ratio {ratio:.3g} > 1 on window T={T:.3e}")
        traj = new
        if dist <= tol:
            report.converged = True
            break
    return traj, report


def window_length(V: State3, p: Params, c_w: float = 0.5) -> float:
    """C_w eps min(1, N(V)^-2)."""
    N = n_norm(V, State3.rest(V.grid, p))
    return c_w * p.eps * min(1.0, N**-2 if N > 0 else 1.0)


def continuation(
    V0: State3,
    T_total: float,
    p: Params,
    cor: CoriolisProfile | None,
    tol: float = 1e-10,
    *,
    c_w: float = 0.5,
    nodes: int = 32,
    max_iter: int = 60,
    n_ceiling: float = math.inf,
    min_window: float = 1e-12,
    raise_on_blowup: bool = False,
) -> TrajectoryMesh:
    """Chain Duhamel windows to cover [0, T_total].

    Each window has length C_w eps min(1, N^-2) evaluated at its initial
    state, halved on NotContracting.  The returned mesh holds every window
    node; ``mesh.windows`` lists (start, length, report) per window and
    ``mesh.status`` is ``"blowup_suspected"`` if N exceeded ``n_ceiling``.
    """
    if not T_total > 0:
        raise ValueError(f"T_total must be positive, got {T_total}")
    if p.eps <= 0:
        raise ValueError("the Duhamel construction needs eps > 0")
    g = V0.grid
    E = State3.rest(g, p)
    model.check_admissible(V0, p.lambda_bar)
    times, data, windows = [0.0], [V0.data.copy()], []
    V, t = V0.copy(), 0.0
    status = "complete"
    while T_total - t > 1e-12 * T_total:
        T_w = min(window_length(V, p, c_w), T_total - t)
        while True:
            try:
                mesh, rep = solve_window(V, T_w, tol, max_iter, p, cor, nodes=nodes, t0=t)
                if not rep.converged:
                    raise NotContracting(f"no convergence in {max_iter} iterations")
                break
            except NotContracting as exc:
                log.info("halving window at t=%.6g: %s", t, exc)
                T_w *= 0.5
                if T_w < min_window:
                    raise
        windows.append((t, T_w, rep))
        times.extend(mesh.times[1:])
        data.extend(mesh.data[1:])
        V = mesh.final
        t = float(mesh.times[-1])
        model.check_admissible(V, p.lambda_bar)
        if n_norm(V, E) > n_ceiling:
            status = "blowup_suspected"
            if raise_on_blowup:
                raise BlowupSuspected(f"N = {n_norm(V, E):.3e} > {n_ceiling} at t = {t:.6g}")
            break
    out = TrajectoryMesh(g, np.array(times), np.array(data), status=status, windows=windows)
    if status != "complete":
        out.stop_time = t
    return out

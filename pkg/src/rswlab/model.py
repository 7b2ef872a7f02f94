"""Physical and symmetrized states of the 1D rotating shallow water system.

The symmetrized unknown is ``V = (lam, u, v)`` with ``lam = 2 sqrt(g h)``;
in these variables the flux Jacobian

    S(V) = [[u, lam/2, 0], [lam/2, u, 0], [0, 0, u]]

is symmetric and the system reads

    (V - E)_t + S(V) V_x + F x (V - E) = eps (V - E)_xx,   F = (f, 0, 0).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import GridMismatch, NonPositiveHeight, NonPositiveLambda
from .grid import Field, Grid

# states with min lam below this fraction of lam_bar are rejected
ADMISSIBLE_FRACTION = 1e-8


@dataclass(frozen=True)
class Params:
    g: float = 9.81
    h_bar: float = 1.0
    eps: float = 0.0

    def __post_init__(self):
        if not self.g > 0:
            raise ValueError(f"gravity must be positive, got {self.g}")
        if not self.h_bar > 0:
            raise ValueError(f"h_bar must be positive, got {self.h_bar}")
        if self.eps < 0:
            raise ValueError(f"eps must be >= 0, got {self.eps}")

    @property
    def lambda_bar(self) -> float:
        return 2.0 * np.sqrt(self.g * self.h_bar)


@dataclass(frozen=True, eq=False)
class CoriolisProfile:
    grid: Grid
    f: np.ndarray
    f_x: np.ndarray
    f_xx: np.ndarray

    @classmethod
    def from_values(cls, grid: Grid, f) -> "CoriolisProfile":
        f = np.broadcast_to(np.asarray(f, dtype=float), (grid.n,)).copy()
        return cls(grid, f, grid.diff(f, 1), grid.diff(f, 2))

    @classmethod
    def constant(cls, grid: Grid, f0: float = 1.0) -> "CoriolisProfile":
        return cls.from_values(grid, np.full(grid.n, float(f0)))

    @classmethod
    def sinusoidal(cls, grid: Grid, f0: float = 1.0, f1: float = 0.0) -> "CoriolisProfile":
        """f0 + f1 sin(2 pi x / L): a periodic stand-in for a beta-plane."""
        return cls.from_values(grid, f0 + f1 * np.sin(2 * np.pi * grid.x / grid.length))

    @classmethod
    def zero(cls, grid: Grid) -> "CoriolisProfile":
        return cls.constant(grid, 0.0)

    @cached_property
    def sup_f(self) -> float:
        return float(np.max(np.abs(self.f)))

    @cached_property
    def sup_fx(self) -> float:
        return float(np.max(np.abs(self.f_x)))

    @cached_property
    def sup_fxx(self) -> float:
        return float(np.max(np.abs(self.f_xx)))


@dataclass(eq=False)
class State3:
    """Symmetrized state; ``data`` has shape (3, n) holding lam, u, v."""

    grid: Grid
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.shape != (3, self.grid.n):
            raise ValueError(f"State3 data must have shape (3, {self.grid.n}), got {self.data.shape}")

    @classmethod
    def from_components(cls, grid: Grid, lam, u, v) -> "State3":
        n = grid.n
        return cls(grid, np.stack([np.broadcast_to(np.asarray(c, dtype=float), (n,)) for c in (lam, u, v)]))

    @classmethod
    def rest(cls, grid: Grid, p: Params) -> "State3":
        return cls.from_components(grid, p.lambda_bar, 0.0, 0.0)

    @property
    def lam(self) -> np.ndarray:
        return self.data[0]

    @property
    def u(self) -> np.ndarray:
        return self.data[1]

    @property
    def v(self) -> np.ndarray:
        return self.data[2]

    def component(self, i: int) -> Field:
        return Field(self.grid, self.data[i])

    def copy(self) -> "State3":
        return State3(self.grid, self.data.copy())

    def with_data(self, data) -> "State3":
        return State3(self.grid, data)


@dataclass(eq=False)
class PhysState:
    grid: Grid
    h: np.ndarray
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        n = self.grid.n
        for name in ("h", "u", "v"):
            arr = np.broadcast_to(np.asarray(getattr(self, name), dtype=float), (n,)).copy()
            setattr(self, name, arr)

    @classmethod
    def rest(cls, grid: Grid, p: Params) -> "PhysState":
        return cls(grid, np.full(grid.n, p.h_bar), 0.0, 0.0)


def _check(a: Grid, b: Grid):
    if a != b:
        raise GridMismatch(f"{a} != {b}")


def symmetrize(p: PhysState, g: float) -> State3:
    if np.min(p.h) <= 0:
        raise NonPositiveHeight(f"min h = {np.min(p.h):.3e} <= 0")
    return State3.from_components(p.grid, 2.0 * np.sqrt(g * p.h), p.u, p.v)


def desymmetrize(V: State3, g: float) -> PhysState:
    if np.min(V.lam) <= 0:
        raise NonPositiveLambda(f"min lambda = {np.min(V.lam):.3e} <= 0")
    return PhysState(V.grid, V.lam**2 / (4.0 * g), V.u.copy(), V.v.copy())


def check_admissible(V: State3, lambda_bar: float):
    lam_min = float(np.min(V.lam))
    if not lam_min > ADMISSIBLE_FRACTION * lambda_bar:
        raise NonPositiveHeight(f"min lambda = {lam_min:.3e} below admissibility threshold")


def _apply_sym(grid: Grid, lam, u, w):
    """Dealiased (u w1 + lam/2 w2, lam/2 w1 + u w2, u w3) for arrays.

    Equivalent to forming every product as P(Pa * Pb); inputs are projected
    once and the stacked output once.
    """
    lam, u, w = grid.project(lam), grid.project(u), grid.project(w)
    half = 0.5 * lam
    out = np.stack([u * w[0] + half * w[1], half * w[0] + u * w[1], u * w[2]])
    return grid.project(out)


def apply_S(V: State3, W: State3) -> State3:
    _check(V.grid, W.grid)
    return State3(V.grid, _apply_sym(V.grid, V.lam, V.u, W.data))


def apply_S_x(V: State3, W: State3) -> State3:
    """S_x(V) W, i.e. the symmetric matrix built from (lam_x, u_x)."""
    _check(V.grid, W.grid)
    g = V.grid
    return State3(g, _apply_sym(g, g.diff(V.lam), g.diff(V.u), W.data))


def char_speeds(V: State3):
    half = 0.5 * V.lam
    return V.u.copy(), V.u + half, V.u - half


def s_x_opnorm(V: State3) -> np.ndarray:
    """Pointwise spectral norm of S_x: max(|u_x|, |u_x + lam_x/2|, |u_x - lam_x/2|)."""
    ux = V.grid.diff(V.u)
    lx = V.grid.diff(V.lam)
    return s_x_opnorm_from(ux, lx)


def s_x_opnorm_from(ux, lx):
    ux = np.asarray(ux, dtype=float)
    half = 0.5 * np.asarray(lx, dtype=float)
    return np.maximum(np.abs(ux), np.maximum(np.abs(ux + half), np.abs(ux - half)))


def coriolis_term(V: State3, E: State3, cor: CoriolisProfile | None) -> State3:
    """F x (V - E) with F = (f, 0, 0): (0, -f v, f u)."""
    _check(V.grid, E.grid)
    if cor is None:
        return State3(V.grid, np.zeros_like(V.data))
    _check(V.grid, cor.grid)
    g = V.grid
    w = V.data - E.data
    return State3(g, np.stack([np.zeros(g.n), -g.product(cor.f, w[2]), g.product(cor.f, w[1])]))


def hyperbolic_rhs(V: State3, E: State3, cor: CoriolisProfile | None, *, advection: bool = True) -> State3:
    """Tendency -S(V) V_x - F x (V - E) of the inviscid symmetrized system."""
    g = V.grid
    out = np.zeros_like(V.data)
    if advection:
        vx = g.diff(V.data)
        out -= _apply_sym(g, V.lam, V.u, vx)
    if cor is not None:
        out -= coriolis_term(V, E, cor).data
    return State3(g, out)


def conservative_residual(times, traj, cor: CoriolisProfile | None, g: float) -> np.ndarray:
    """L2 norms of the residual of the conservative system on interior time nodes.

    Parameters
    ----------
    times : (M,) uniformly spaced time nodes
    traj : sequence of PhysState at ``times``
    cor : Coriolis profile (None for f = 0)
    g : gravity

    Returns
    -------
    (M - 2, 3) array of ||residual||_L2 for mass, x-momentum, y-momentum.
    """
    times = np.asarray(times, dtype=float)
    if len(traj) < 3 or len(times) != len(traj):
        raise ValueError("need at least 3 time nodes matching the trajectory")
    dt = np.diff(times)
    if not np.allclose(dt, dt[0], rtol=1e-9, atol=0):
        raise ValueError("time nodes must be uniformly spaced")
    dt = dt[0]
    grid = traj[0].grid
    f = np.zeros(grid.n) if cor is None else cor.f
    q = np.array([[s.h, s.h * s.u, s.h * s.v] for s in traj])
    out = np.empty((len(traj) - 2, 3))
    for i in range(1, len(traj) - 1):
        s = traj[i]
        qt = (q[i + 1] - q[i - 1]) / (2 * dt)
        flux = np.stack([s.h * s.u, s.h * s.u**2 + 0.5 * g * s.h**2, s.h * s.u * s.v])
        src = np.stack([np.zeros(grid.n), f * s.h * s.v, -f * s.h * s.u])
        r = qt + grid.diff(flux) - src
        out[i - 1] = np.sqrt(np.sum(r**2, axis=-1) * grid.dx)
    return out

"""Method-of-lines integrator: Strang splitting of exact diffusion and RK4 transport."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import diagnostics, model
from .errors import NonFinite, NonPositiveHeight
from .grid import Grid
from .model import CoriolisProfile, Params, State3
from .trajectory import TrajectoryMesh

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class StepControl:
    t_end: float
    cfl: float = 0.4
    dt_max: float = math.inf
    sample_every: int = 1

    def __post_init__(self):
        if not 0 < self.cfl <= 1:
            raise ValueError(f"cfl must lie in (0, 1], got {self.cfl}")
        if not self.dt_max > 0:
            raise ValueError(f"dt_max must be positive, got {self.dt_max}")
        if self.t_end < 0:
            raise ValueError(f"t_end must be >= 0, got {self.t_end}")
        if self.sample_every < 1:
            raise ValueError("sample_every must be >= 1")


def cfl_dt(V: State3, grid: Grid, cfl: float, dt_max: float = math.inf) -> float:
    speed = max(float(np.max(np.abs(c))) for c in model.char_speeds(V))
    if speed == 0:
        return dt_max
    return min(cfl * grid.dx / speed, dt_max)


def _finite(data, t=None):
    if not np.all(np.isfinite(data)):
        raise NonFinite("non-finite samples in state" + ("" if t is None else f" at t = {t:.6g}"))


def step_hyperbolic_rk4(V: State3, dt: float, E: State3, cor: CoriolisProfile | None, *, advection: bool = True) -> State3:
    """Classical RK4 step of V' = -S(V) V_x - F x (V - E)."""
    if not advection and cor is None:
        return V.copy()

    def rhs(data):
        return model.hyperbolic_rhs(State3(V.grid, data), E, cor, advection=advection).data

    y = V.data
    k1 = rhs(y)
    k2 = rhs(y + 0.5 * dt * k1)
    k3 = rhs(y + 0.5 * dt * k2)
    k4 = rhs(y + dt * k3)
    out = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    _finite(out)
    return State3(V.grid, out)


def step_strang(V: State3, dt: float, p: Params, cor: CoriolisProfile | None, *, advection: bool = True) -> State3:
    """Half diffusion, full transport, half diffusion.

    Diffusion acts on V - E; since E is constant this is the same as
    diffusing V.  With eps = 0 the heat substeps are skipped entirely.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    g = V.grid
    E = State3.rest(g, p)
    if p.eps == 0:
        return step_hyperbolic_rk4(V, dt, E, cor, advection=advection)
    W = State3(g, g.heat(V.data, p.eps, 0.5 * dt))
    W = step_hyperbolic_rk4(W, dt, E, cor, advection=advection)
    return State3(g, g.heat(W.data, p.eps, 0.5 * dt))


@dataclass
class IntegrationResult:
    mesh: TrajectoryMesh
    records: list = field(default_factory=list)
    status: str = "complete"
    stop_time: float | None = None
    steps: int = 0


def integrate(
    V0: State3,
    ctrl: StepControl,
    p: Params,
    cor: CoriolisProfile | None,
    monitors=(),
    sample_times=None,
    record: bool = True,
    stop_when=None,
) -> IntegrationResult:
    """Advance V0 to ``ctrl.t_end`` with CFL-controlled Strang steps.

    States are sampled at t = 0, every ``ctrl.sample_every`` steps and at
    ``t_end``.  If ``sample_times`` is given, steps are shortened to land
    exactly on those times and only they are sampled (plus t = 0).
    Every sample is passed to each ``monitors`` callable as ``fn(t, V)``.
    ``stop_when(record)`` may end the run after any sample (status
    ``"stopped"``); it requires ``record=True``.

    Early stops (non-finite state, loss of positivity) are reported through
    ``status`` and ``stop_time``; the partial trajectory is returned.
    """
    g = V0.grid
    model.check_admissible(V0, p.lambda_bar)
    targets = None
    if sample_times is not None:
        targets = [float(s) for s in np.asarray(sample_times, dtype=float) if s > 0]
        if targets and targets[-1] > ctrl.t_end * (1 + 1e-12):
            raise ValueError("sample_times beyond t_end")
    times, states, records = [], [], []

    def sample(t, V):
        times.append(t)
        states.append(V.data.copy())
        if record:
            records.append(diagnostics.make_record(t, V, p))
        for fn in monitors:
            fn(t, V)

    V, t, steps = V0.copy(), 0.0, 0
    sample(t, V)
    status, stop_time = "complete", None
    t_end = ctrl.t_end
    next_target = 0

    def should_stop():
        return stop_when is not None and records and stop_when(records[-1])

    while t < t_end * (1 - 1e-14) and t_end - t > 1e-14 * max(1.0, t_end):
        dt = cfl_dt(V, g, ctrl.cfl, ctrl.dt_max)
        stop_at = targets[next_target] if targets else t_end
        hit = False
        if t + dt >= stop_at * (1 - 1e-12):
            dt, hit = stop_at - t, True
        elif t + 1.5 * dt > stop_at:
            # avoid a sliver step before the target
            dt = 0.5 * (stop_at - t)
        try:
            V = step_strang(V, dt, p, cor)
            model.check_admissible(V, p.lambda_bar)
        except NonFinite:
            status, stop_time = "nonfinite", t + dt
            log.warning("non-finite state at t=%.6g", stop_time)
            break
        except NonPositiveHeight:
            status, stop_time = "nonpositive", t + dt
            log.warning("loss of positivity at t=%.6g", stop_time)
            break
        t = stop_at if hit else t + dt
        steps += 1
        if targets is not None:
            if not hit:
                continue
            sample(t, V)
            next_target += 1
            if next_target >= len(targets):
                break
        elif hit or steps % ctrl.sample_every == 0:
            sample(t, V)
        else:
            continue
        if should_stop():
            status, stop_time = "stopped", t
            break
    mesh = TrajectoryMesh(g, np.array(times), np.array(states), status=status, stop_time=stop_time)
    return IntegrationResult(mesh, records, status, stop_time, steps)

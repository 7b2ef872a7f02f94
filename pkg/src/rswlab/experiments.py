"""Scripted numerical studies and their persisted artifacts."""
from __future__ import annotations

import csv
import json
import logging
import math
import os
import subprocess
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import optimize, stats

from . import __version__, diagnostics
from .config import RunConfig
from .diagnostics import RECORD_COLUMNS, DiagnosticsRecord
from .grid import Grid
from .lines import StepControl, integrate
from .mild import continuation
from .model import CoriolisProfile, Params, PhysState, State3, desymmetrize, symmetrize
from .trajectory import TrajectoryMesh

log = logging.getLogger(__name__)


class StudyAborted(RuntimeError):
    pass


# -- set-up -------------------------------------------------------------------


def make_initial_data(kind: str, A: float, width: float, grid: Grid, p: Params, modes: int = 1) -> PhysState:
    """Smooth periodic perturbation of the rest state.

    h0 = h_bar (1 + A profile); u0 = v0 = A c0 w profile' for the bump
    generators (c0 = sqrt(g h_bar)) and A c0 cos(.) for ``sine``, so the
    velocity perturbation has the same size as the height one.
    """
    x, L = grid.x, grid.length
    c0 = math.sqrt(p.g * p.h_bar)
    if kind == "gaussian_bump":
        centers = [L / 2]
    elif kind == "two_bump":
        centers = [L / 3, 2 * L / 3]
    elif kind == "sine":
        kx = 2 * np.pi * modes / L
        prof, vel = np.sin(kx * x), np.cos(kx * x)
        centers = None
    else:
        raise ValueError(f"unknown initial data kind {kind!r}")
    if centers is not None:
        prof = np.zeros_like(x)
        vel = np.zeros_like(x)
        for x0 in centers:
            # nearest periodic image keeps the bump smooth across the seam
            d = (x - x0 + L / 2) % L - L / 2
            b = np.exp(-(d**2) / (2 * width**2))
            prof += b
            vel += -d / width * b
    h = p.h_bar * (1 + A * prof)
    if np.min(h) <= 0:
        raise ValueError(f"amplitude {A} makes h0 non-positive (min {np.min(h):.3e})")
    return PhysState(grid, h, A * c0 * vel, A * c0 * vel)


def build(cfg: RunConfig):
    """(grid, params, coriolis, V0) for a config."""
    grid = Grid(cfg.grid.n, cfg.grid.length)
    p = Params(g=cfg.params.g, h_bar=cfg.params.h_bar, eps=cfg.params.eps)
    if cfg.coriolis.profile == "constant":
        cor = CoriolisProfile.constant(grid, cfg.coriolis.f0)
    else:
        cor = CoriolisProfile.sinusoidal(grid, cfg.coriolis.f0, cfg.coriolis.f1)
    ic = cfg.initial
    V0 = symmetrize(make_initial_data(ic.kind, ic.amplitude, ic.width, grid, p, ic.modes), p.g)
    return grid, p, cor, V0


@dataclass
class RunOutcome:
    config: RunConfig
    records: list
    mesh: TrajectoryMesh
    status: str
    stop_time: float | None = None

    def summary(self) -> dict:
        last = self.records[-1] if self.records else None
        return {
            "status": self.status,
            "stop_time": self.stop_time,
            "samples": len(self.records),
            "final": asdict(last) if last else None,
        }


def run(cfg: RunConfig, sample_times=None, stop_when=None) -> RunOutcome:
    grid, p, cor, V0 = build(cfg)
    if cfg.solver == "mild":
        mesh = continuation(
            V0, cfg.horizon, p, cor, cfg.mild.tol,
            c_w=cfg.mild.c_w, nodes=cfg.mild.nodes, max_iter=cfg.mild.max_iter, n_ceiling=cfg.mild.n_ceiling,
        )
        records = [diagnostics.make_record(t, mesh.state(i), p) for i, t in enumerate(mesh.times)]
        return RunOutcome(cfg, records, mesh, mesh.status, mesh.stop_time)
    ctrl = StepControl(cfg.horizon, cfg.step.cfl, cfg.step.dt_max, cfg.step.sample_every)
    res = integrate(V0, ctrl, p, cor, sample_times=sample_times, stop_when=stop_when)
    return RunOutcome(cfg, res.records, res.mesh, res.status, res.stop_time)


def workers() -> int:
    env = os.environ.get("RSW_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def pool_map(fn, items):
    items = list(items)
    n = min(workers(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


# -- studies -------------------------------------------------------------------


@dataclass
class Verdict:
    name: str
    expectation: str
    diagnostic: str
    passed: bool
    value: object = None


@dataclass
class StudyResult:
    study: str
    runs: list = field(default_factory=list)
    fits: dict = field(default_factory=dict)
    verdicts: list = field(default_factory=list)
    config: dict = field(default_factory=dict)
    # diagnostics of one representative run; written to records.csv, not to JSON
    records: list = field(default_factory=list, repr=False, compare=False)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def to_dict(self) -> dict:
        return {
            "study": self.study,
            "runs": self.runs,
            "fits": self.fits,
            "verdicts": [asdict(v) for v in self.verdicts],
            "config": self.config,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StudyResult":
        return cls(d["study"], d["runs"], d["fits"], [Verdict(**v) for v in d["verdicts"]], d.get("config", {}))


def fit_slope(x, y, confidence: float = 0.95) -> dict:
    """Least-squares slope of log y vs log x with a t-based confidence interval."""
    lx, ly = np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float))
    if len(lx) < 2:
        return {"slope": math.nan, "ci_low": math.nan, "ci_high": math.nan, "points": len(lx)}
    if len(lx) == 2:
        s = float((ly[1] - ly[0]) / (lx[1] - lx[0]))
        return {"slope": s, "ci_low": math.nan, "ci_high": math.nan, "points": 2}
    r = stats.linregress(lx, ly)
    half = float(stats.t.ppf(0.5 + confidence / 2, len(lx) - 2) * r.stderr)
    return {"slope": float(r.slope), "ci_low": float(r.slope) - half, "ci_high": float(r.slope) + half, "points": len(lx)}


def _sup_l2_distance(a: np.ndarray, b: np.ndarray, dx: float) -> float:
    return float(np.max(np.sqrt(np.sum((a - b) ** 2, axis=(1, 2)) * dx)))


def _run_eps(args):
    cfg, eps, sample_times = args
    return run(cfg.replace(**{"params.eps": eps}), sample_times=sample_times)


def eps_cauchy_sweep(cfg: RunConfig, eps_list=None, eps_ref=None) -> StudyResult:
    """Distance between regularized solutions as the viscosity shrinks.

    D(eps) = sup_t ||V^eps(t) - V^ref(t)||_L2 on a common sample mesh.  The
    fit is reported against eps itself and against the gap eps - eps_ref.
    """
    eps_list = list(cfg.study.eps_list if eps_list is None else eps_list)
    eps_ref = cfg.study.eps_ref if eps_ref is None else eps_ref
    if not eps_ref < min(eps_list):
        raise ValueError("reference viscosity must be below every swept value")
    sample_times = np.linspace(0, cfg.horizon, cfg.study.samples + 1)[1:]
    outcomes = pool_map(_run_eps, [(cfg, e, sample_times) for e in [*eps_list, eps_ref]])
    for eps, out in zip([*eps_list, eps_ref], outcomes):
        if out.status != "complete":
            raise StudyAborted(f"run eps={eps} stopped early ({out.status} at t={out.stop_time})")
    ref = outcomes[-1]
    dx = cfg.grid.length / cfg.grid.n
    dists = [_sup_l2_distance(o.mesh.data, ref.mesh.data, dx) for o in outcomes[:-1]]
    fit_eps = fit_slope(eps_list, dists)
    fit_gap = fit_slope(np.asarray(eps_list) - eps_ref, dists)
    order = np.argsort(eps_list)
    monotone = bool(np.all(np.diff(np.asarray(dists)[order]) >= 0))
    res = StudyResult("eps_cauchy_sweep", config=cfg.to_dict())
    res.runs = [
        {"eps": e, "distance": d, "status": o.status, "final": asdict(o.records[-1])}
        for e, d, o in zip(eps_list, dists, outcomes)
    ]
    res.runs.append({"eps": eps_ref, "distance": 0.0, "status": ref.status, "reference": True})
    res.fits = {"distance_vs_eps": fit_eps, "distance_vs_gap": fit_gap}
    res.records = ref.records
    res.verdicts = [
        Verdict("slope_vs_eps", "slope of log D vs log eps in [0.8, 1.2]", "lines.integrate + sup_t L2 distance",
                0.8 <= fit_eps["slope"] <= 1.2, fit_eps["slope"]),
        Verdict("slope_vs_gap", "slope of log D vs log(eps - eps_ref) in [0.8, 1.2]",
                "lines.integrate + sup_t L2 distance", 0.8 <= fit_gap["slope"] <= 1.2, fit_gap["slope"]),
        Verdict("monotone", "D non-decreasing in eps", "sup_t L2 distance", monotone, dists),
    ]
    return res


def amplitude_for_h1(cfg: RunConfig, delta: float) -> float:
    """Amplitude whose initial data has ||V0 - E||_{H1} = delta."""
    if delta == 0:
        return 0.0
    grid, p, _, _ = build(cfg)
    E = State3.rest(grid, p)
    ic = cfg.initial

    def h1(A):
        V = symmetrize(make_initial_data(ic.kind, A, ic.width, grid, p, ic.modes), p.g)
        return math.sqrt(grid.norm_sq(V.data - E.data, 1))

    hi = 1e-3
    while h1(hi) < delta:
        hi *= 2
        if hi > 0.99:
            raise ValueError(f"no admissible amplitude reaches H1 norm {delta}")
    return optimize.brentq(lambda A: h1(A) - delta, 0.0, hi, xtol=1e-15, rtol=1e-13)


def _small_data_run(args):
    cfg, delta, horizon = args
    A = amplitude_for_h1(cfg, delta)
    c = cfg.replace(**{"initial.amplitude": A, "run.horizon": horizon})
    out = run(c)
    _, p, cor, _ = build(c)
    recs = out.records
    l2 = diagnostics.column(recs, "l2_dist")
    vx = diagnostics.column(recs, "vx_l2")
    t = diagnostics.column(recs, "t")
    _, T_delta = diagnostics.stopping_times(recs, math.inf, delta)
    energy_ok, margins = diagnostics.energy_inequality_check(recs, p, delta)
    root = math.sqrt(delta)
    # first sample at which each condition fails (None = never)
    first = {
        "T_delta_reached": T_delta,
        "l2_above_3delta": _first_time(t, l2 > 3 * delta * (1 + 1e-12)),
        "vx_above_sqrt_delta": _first_time(t, vx > root),
        "energy_inequality": _first_time(t[: len(margins)], margins < 0),
        "early_stop": out.stop_time if out.status != "complete" else None,
    }
    failed = {k: v for k, v in first.items() if v is not None}
    vx_ok = diagnostics.vx_growth_bound(recs, p, delta, cor) if p.eps > 0 else np.array([True])
    pos = diagnostics.positivity_monitor(out.mesh.times, diagnostics.phys_traj(out.mesh, p.g), p.h_bar)
    return {
        "delta": delta,
        "amplitude": A,
        "status": out.status,
        "T_delta": T_delta,
        "max_l2": float(l2.max()),
        "max_vx_l2": float(vx.max()),
        "min_energy_margin": float(margins.min()) if len(margins) else 9 * delta**2,
        "energy_ok": energy_ok,
        "vx_growth_ok": bool(vx_ok.all()),
        "positivity_ok": pos.passed,
        "global": not failed,
        "first_failure": min(failed, key=failed.get) if failed else None,
        "records": recs,
    }


def _first_time(t, mask):
    idx = np.flatnonzero(mask)
    return float(t[idx[0]]) if len(idx) else None


def small_data_global(cfg: RunConfig, delta_list=None, horizon=None) -> StudyResult:
    """Long runs from data of H1 size delta; global iff no smallness threshold is crossed."""
    delta_list = list(cfg.study.delta_list if delta_list is None else delta_list)
    horizon = cfg.horizon if horizon is None else horizon
    if cfg.params.eps <= 0:
        raise ValueError("small-data study needs eps > 0")
    runs = pool_map(_small_data_run, [(cfg, d, horizon) for d in delta_list])
    records = [r.pop("records") for r in runs]
    res = StudyResult("small_data_global", runs=runs, config=cfg.to_dict(), records=records[0])
    for r in runs:
        d = r["delta"]
        res.verdicts.append(
            Verdict(f"global[delta={d:g}]",
                    "T_delta not reached, ||V-E|| <= 3 delta, ||V_x|| <= sqrt(delta), energy margin >= 0",
                    "diagnostics.stopping_times + energy_inequality_check", r["global"], r["first_failure"]))
    return res


def admissible_delta(cfg: RunConfig, lo: float, hi: float, iters: int = 6, horizon=None) -> dict:
    """Bisect (geometrically) for the largest delta whose run stays in the small-data regime."""
    horizon = cfg.horizon if horizon is None else horizon
    def ok(d):
        return _small_data_run((cfg, d, horizon))["global"]

    if not ok(lo):
        return {"delta_max": None, "lo": lo, "hi": lo}
    if ok(hi):
        return {"delta_max": hi, "lo": hi, "hi": hi}
    for _ in range(iters):
        mid = math.sqrt(lo * hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return {"delta_max": lo, "lo": lo, "hi": hi}


def _doubling_run(args):
    cfg, A = args
    c = cfg.replace(**{"initial.amplitude": A})
    if A == 0:
        return {"amplitude": A, "T2": None, "N0": 0.0, "status": "rest", "excluded": True, "records": []}
    N0 = []

    def doubled(rec):
        if not N0:
            N0.append(rec.n_norm)
        return rec.n_norm >= 2 * N0[0]

    out = run(c, stop_when=doubled)
    n = diagnostics.column(out.records, "n_norm")
    t = diagnostics.column(out.records, "t")
    T2 = _first_time(t, n >= 2 * n[0])
    if T2 is not None and len(t) > 1:
        i = int(np.flatnonzero(n >= 2 * n[0])[0])
        # linear interpolation of the crossing between samples
        if i > 0:
            T2 = float(t[i - 1] + (2 * n[0] - n[i - 1]) * (t[i] - t[i - 1]) / (n[i] - n[i - 1]))
    pos = diagnostics.positivity_monitor(out.mesh.times, diagnostics.phys_traj(out.mesh, c.params.g), c.params.h_bar)
    return {
        "amplitude": A,
        "T2": T2,
        "N0": float(n[0]),
        "status": out.status,
        "excluded": T2 is None,
        "positivity_ok": pos.passed,
        "min_h": float(pos.min_h.min()),
        "records": out.records,
    }


def t0_scaling(cfg: RunConfig, amplitude_list=None) -> StudyResult:
    """Norm-doubling time T2(A) = first t with N(t) >= 2 N(0), fitted against A."""
    amps = list(cfg.study.amplitude_list if amplitude_list is None else amplitude_list)
    runs = pool_map(_doubling_run, [(cfg, A) for A in amps])
    records = [r.pop("records") for r in runs]
    used = [r for r in runs if not r["excluded"]]
    fit = fit_slope([r["amplitude"] for r in used], [r["T2"] for r in used])
    res = StudyResult("t0_scaling", runs=runs, fits={"T2_vs_amplitude": fit}, config=cfg.to_dict(),
                      records=records[0])
    res.verdicts.append(
        Verdict("slope", "slope of log T2 vs log A = -1 +/- 0.3", "n_norm doubling time",
                abs(fit["slope"] + 1) <= 0.3 if math.isfinite(fit["slope"]) else False, fit["slope"]))
    by_amp = {r["amplitude"]: r["T2"] for r in used}
    ratios = {a: by_amp[2 * a] / by_amp[a] for a in by_amp if 2 * a in by_amp}
    if ratios:
        res.verdicts.append(
            Verdict("halving", "T2(2A)/T2(A) in [0.35, 0.7]", "n_norm doubling time",
                    all(0.35 <= r <= 0.7 for r in ratios.values()), list(ratios.values())))
    return res


def spectral_tail_fraction(V: State3, p: Params) -> float:
    """Share of ||V - E||^2 held by the upper half of the retained (2/3-rule) band."""
    g = V.grid
    wh = g.rfft(V.data - State3.rest(g, p).data)
    j = np.arange(g.n // 2 + 1)
    c = np.where((j == 0) | (j == g.n // 2), 1.0, 2.0)
    e = np.sum(c * np.abs(wh) ** 2, axis=0)
    total = float(np.sum(e))
    if total == 0:
        return 0.0
    return float(np.sum(e[6 * j > g.n]) / total)


def _probe_run(args):
    cfg, A, eps = args
    c = cfg.replace(**{"initial.amplitude": A, "params.eps": eps})
    grid, p, _, _ = build(c)
    tails = []
    out = run(c)
    for i, t in enumerate(out.mesh.times):
        tails.append(spectral_tail_fraction(out.mesh.state(i), p))
    tails = np.array(tails)
    t = out.mesh.times
    sup = diagnostics.column(out.records, "sup_vx")
    loss = _first_time(t, tails > 0.01)
    if loss is None and out.status != "complete":
        loss = out.stop_time
    upto = t <= (loss if loss is not None else t[-1])
    s = sup[upto]
    rate = float(np.max(np.gradient(s, t[upto]))) if s.size > 2 else math.nan
    return {
        "amplitude": A,
        "eps": eps,
        "status": out.status,
        "resolution_loss_time": loss,
        "sup_vx_initial": float(sup[0]),
        "sup_vx_max": float(sup.max()),
        "steepening_rate": rate,
        "monotone_before_loss": bool(np.all(np.diff(s) >= -1e-12 * max(s.max(), 1.0))),
        # data that are not a simple wave first split into two waves, which
        # lowers sup|V_x| before the steepening starts
        "sup_vx_min_time": float(t[upto][int(np.argmin(s))]),
        "growth_factor_before_loss": float(s[-1] / s[0]) if s.size and s[0] > 0 else math.nan,
        "records": out.records,
    }


def shock_probe(cfg: RunConfig, A_large=None, A_small=None, eps_contrast: float = 1e-2) -> StudyResult:
    """Track gradient steepening at eps = 0 against a small-amplitude and a viscous contrast run."""
    A_large = cfg.study.a_large if A_large is None else A_large
    A_small = A_large / 10 if A_small is None else A_small
    runs = pool_map(_probe_run, [(cfg, A_large, 0.0), (cfg, A_small, 0.0), (cfg, A_large, eps_contrast)])
    records = [r.pop("records") for r in runs]
    res = StudyResult("shock_probe", runs=runs, config=cfg.to_dict(), records=records[0])
    big, small, visc = runs
    res.verdicts = [
        Verdict("steepening", "large A: sup|V_x| grows monotonically before resolution loss",
                "diagnostics sup_vx + spectral tail", big["monotone_before_loss"], big["resolution_loss_time"]),
        Verdict("small_contrast", "small A: no resolution loss within horizon", "spectral tail",
                small["resolution_loss_time"] is None, small["resolution_loss_time"]),
        Verdict("viscous_contrast", f"eps={eps_contrast}: no resolution loss", "spectral tail",
                visc["resolution_loss_time"] is None, visc["resolution_loss_time"]),
    ]
    return res


# -- persistence -----------------------------------------------------------------


def write_records_csv(records, path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(RECORD_COLUMNS)
            for r in records:
                w.writerow([format(x, ".17g") for x in r.as_tuple()])
    except OSError as exc:
        raise OSError(f"cannot write records to {path}: {exc}") from exc


def read_records_csv(path) -> list[DiagnosticsRecord]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if tuple(header) != RECORD_COLUMNS:
        raise ValueError(f"{path}: unexpected header {header}")
    return [DiagnosticsRecord(*map(float, row)) for row in body]


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def write_json(obj, path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(obj, indent=2, default=_json_default, sort_keys=False) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def persist(result, path):
    """StudyResult -> JSON file; list of DiagnosticsRecord -> CSV file."""
    if isinstance(result, StudyResult):
        write_json(result.to_dict(), path)
    else:
        write_records_csv(list(result), path)


def read_study(path) -> StudyResult:
    return StudyResult.from_dict(json.loads(Path(path).read_text()))


def code_version() -> str:
    try:
        rev = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"], capture_output=True, text=True, timeout=5,
            cwd=Path(__file__).resolve().parent,
        ).stdout.strip()
    except (OSError, subprocess.SubprocessError):
        rev = ""
    return f"{__version__}+{rev}" if rev else __version__


def manifest(cfg: RunConfig, command: str) -> dict:
    return {"command": command, "version": code_version(), "config": cfg.to_dict()}

"""Compare the Duhamel continuation with the method-of-lines solver.

Prints the sup-in-time L2 distance and per-window Picard statistics.

    python scripts/cross_solver.py [--set params.eps=0.1]
"""
import argparse
from pathlib import Path

import numpy as np

from rswlab import experiments as X
from rswlab import lines, mild
from rswlab.config import parse_config

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", type=Path, default=ROOT / "configs" / "mild.ini")
    ap.add_argument("--set", action="append", default=[], dest="overrides")
    args = ap.parse_args()
    cfg = parse_config(args.config, args.overrides)
    grid, p, cor, V0 = X.build(cfg)
    m = mild.continuation(V0, cfg.horizon, p, cor, cfg.mild.tol, c_w=cfg.mild.c_w, nodes=cfg.mild.nodes,
                          max_iter=cfg.mild.max_iter)
    ref = lines.integrate(V0, lines.StepControl(cfg.horizon, cfg.step.cfl, cfg.step.dt_max), p, cor,
                          sample_times=m.times, record=False)
    dist = np.sqrt(np.sum((ref.mesh.data - m.data) ** 2, axis=(1, 2)) * grid.dx)
    for t0, T, rep in m.windows:
        print(f"window t0={t0:8.4f} T={T:.3e} iterations={rep.iterations:3d} ratio={rep.contraction_ratio:.3f}")
    print(f"{len(m.windows)} windows, lines steps {ref.steps}, sup_t L2 distance {dist.max():.3e}")


if __name__ == "__main__":
    main()

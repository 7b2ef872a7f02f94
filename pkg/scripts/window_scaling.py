"""Count continuation windows over an amplitude ladder at fixed horizon.

The window rule C_w eps min(1, N^-2) makes the count grow like A^2 once
N(V0) exceeds one.

    python scripts/window_scaling.py --amplitudes 0.1 0.2 0.4
"""
import argparse
from pathlib import Path

import numpy as np

from rswlab import experiments as X
from rswlab import mild
from rswlab.config import parse_config

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", type=Path, default=ROOT / "configs" / "mild.ini")
    ap.add_argument("--amplitudes", type=float, nargs="+", default=[0.1, 0.2, 0.4])
    ap.add_argument("--set", action="append", default=[], dest="overrides")
    args = ap.parse_args()
    base = parse_config(args.config, ["grid.n=32", "grid.length=12.566370614359172", "initial.width=1.5",
                                      "mild.nodes=8", "mild.tol=1e-8", *args.overrides])
    counts = []
    for A in args.amplitudes:
        cfg = base.replace(**{"initial.amplitude": A})
        _, p, cor, V0 = X.build(cfg)
        m = mild.continuation(V0, cfg.horizon, p, cor, cfg.mild.tol, c_w=cfg.mild.c_w, nodes=cfg.mild.nodes)
        counts.append(len(m.windows))
        print(f"A={A:g}  windows={len(m.windows)}")
    fit = X.fit_slope(args.amplitudes, counts)
    print(f"slope of log(windows) vs log(A): {fit['slope']:.3f}")


if __name__ == "__main__":
    main()

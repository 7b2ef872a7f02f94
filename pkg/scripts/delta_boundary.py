"""Bisect for the largest data size delta that stays in the small-data regime.

Maps the empirical boundary delta(eps) at fixed Coriolis profile; nothing
is claimed about its shape.

    python scripts/delta_boundary.py --eps 0.05 0.02 --horizon 50
"""
import argparse
from pathlib import Path

from rswlab import experiments as X
from rswlab.config import parse_config

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", type=Path, default=ROOT / "configs" / "small_data.ini")
    ap.add_argument("--eps", type=float, nargs="+", default=[0.05])
    ap.add_argument("--lo", type=float, default=1e-3)
    ap.add_argument("--hi", type=float, default=0.5)
    ap.add_argument("--iters", type=int, default=6)
    ap.add_argument("--horizon", type=float, default=50.0)
    ap.add_argument("--out", type=Path, default=ROOT / "out" / "delta_boundary.json")
    args = ap.parse_args()
    cfg = parse_config(args.config)
    rows = []
    for eps in args.eps:
        res = X.admissible_delta(cfg.replace(**{"params.eps": eps}), args.lo, args.hi, args.iters, args.horizon)
        rows.append({"eps": eps, **res})
        print(f"eps={eps:g}  delta_max={res['delta_max']}  bracket=[{res['lo']:.3g}, {res['hi']:.3g}]")
    X.write_json({"horizon": args.horizon, "rows": rows, "config": cfg.to_dict()}, args.out)


if __name__ == "__main__":
    main()

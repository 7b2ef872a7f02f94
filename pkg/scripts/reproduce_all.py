"""Run every study config through the CLI into ``out/``.

    python scripts/reproduce_all.py [--out out]
"""
import argparse
import sys
from pathlib import Path

from rswlab import cli

ROOT = Path(__file__).resolve().parents[1]
STUDIES = [
    ("sweep-eps", "eps_sweep.ini"),
    ("small-data", "small_data.ini"),
    ("t0-scaling", "t0_scaling.ini"),
    ("shock-probe", "shock_probe.ini"),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=ROOT / "out")
    args = ap.parse_args()
    codes = {}
    for command, cfg in STUDIES:
        print(f"== {command} ({cfg})")
        codes[command] = cli.main([command, "--config", str(ROOT / "configs" / cfg), "--out", str(args.out / command)])
    print("== run (mild.ini)")
    codes["mild run"] = cli.main(["run", "--config", str(ROOT / "configs" / "mild.ini"), "--out", str(args.out / "mild")])
    for name, code in codes.items():
        print(f"{name:<12s} exit {code}")
    return max(codes.values())


if __name__ == "__main__":
    sys.exit(main())

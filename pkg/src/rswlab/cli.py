"""Command-line entry point (``rsw``).

Exit codes: 0 success, 1 error, 2 partial output after an early stop.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from . import experiments, verify
from .config import RunConfig, parse_config
from .errors import ConfigError

log = logging.getLogger("rswlab")

EXIT_OK, EXIT_ERROR, EXIT_PARTIAL = 0, 1, 2

STUDIES = {
    "sweep-eps": experiments.eps_cauchy_sweep,
    "small-data": experiments.small_data_global,
    "t0-scaling": experiments.t0_scaling,
    "shock-probe": experiments.shock_probe,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rsw", description="Rotating shallow water numerical laboratory.")
    ap.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("run", *STUDIES):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, type=Path, help="INI run configuration")
        sp.add_argument("--out", type=Path, default=None, help="output directory (default: run.output)")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", dest="overrides",
                        help="override a config value; repeatable")
        sp.add_argument("--strict", action="store_true", help="reject unknown sections and keys")
    sp = sub.add_parser("verify", help="run the property-check suite")
    sp.add_argument("--report", type=Path, default=None, help="also write a JSON report here")
    sp.add_argument("--seed", type=int, default=0)
    return ap


def _outputs(out_dir: Path, cfg: RunConfig, command: str, records, summary: dict):
    experiments.write_records_csv(records, out_dir / "records.csv")
    experiments.write_json(summary, out_dir / "summary.json")
    experiments.write_json(experiments.manifest(cfg, command), out_dir / "manifest.json")


def _prepare(out_dir: Path):
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out_dir}: {exc}") from exc


def cmd_run(cfg: RunConfig, out_dir: Path) -> int:
    _prepare(out_dir)
    outcome = experiments.run(cfg)
    _outputs(out_dir, cfg, "run", outcome.records, outcome.summary())
    if outcome.status != "complete":
        log.warning("run stopped early (%s at t=%s); partial output in %s", outcome.status, outcome.stop_time, out_dir)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_study(name: str, cfg: RunConfig, out_dir: Path) -> int:
    _prepare(out_dir)
    try:
        result = STUDIES[name](cfg)
    except experiments.StudyAborted as exc:
        log.warning("study aborted: %s", exc)
        summary = {"study": name, "aborted": str(exc), "config": cfg.to_dict()}
        _outputs(out_dir, cfg, name, [], summary)
        return EXIT_PARTIAL
    summary = result.to_dict()
    summary["passed"] = result.passed
    _outputs(out_dir, cfg, name, result.records, summary)
    for v in result.verdicts:
        print(f"{'PASS' if v.passed else 'FAIL'}  {v.name}: {v.expectation} (value={v.value})")
    return EXIT_OK


def cmd_verify(seed: int = 0, report: Path | None = None) -> int:
    checks = verify.run_checks(seed)
    for c in checks:
        print(c.line())
    ok = all(c.passed for c in checks)
    print(f"{sum(c.passed for c in checks)}/{len(checks)} checks passed")
    if report is not None:
        experiments.write_json({"passed": ok, "checks": [asdict(c) for c in checks]}, report)
    return EXIT_OK if ok else EXIT_ERROR


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    try:
        if args.command == "verify":
            return cmd_verify(args.seed, args.report)
        cfg = parse_config(args.config, args.overrides, strict=args.strict)
        out_dir = args.out if args.out is not None else Path(cfg.run.output)
        if args.command == "run":
            return cmd_run(cfg, out_dir)
        return cmd_study(args.command, cfg, out_dir)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

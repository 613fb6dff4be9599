"""Command-line front end: ``analyze``, ``simulate``, ``verify``.

Exit codes: 0 success, 2 configuration error, 3 verification failure,
4 I/O error.  All inputs are local files; there is no network access.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .errors import ConfigError, ModelValidationError, StickyTailsError
from .report import VerificationReport, _jsonable, emit, parse_config, run_analyze, run_verify
from .simulate import PathRecorder, TraceObserver, estimate_local_time_rates, run_engine

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VERIFY = 3
EXIT_IO = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stickytails",
        description=(
            "Tail asymptotics of two-dimensional sticky reflecting Brownian "
            "motions: analytic classification and Monte Carlo verification."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON run configuration")
    common.add_argument("--out", default=None, help="output directory (default: config or cwd)")
    common.add_argument("--seed", type=int, default=None, help="override the configured seed")
    common.add_argument(
        "--format", choices=("json", "csv"), default=None,
        help="json: report.json only; csv: report plus plot-data files",
    )

    sub.add_parser("analyze", parents=[common], help="analytic report only (no simulation)")
    sim = sub.add_parser("simulate", parents=[common], help="simulate and summarize paths")
    sim.add_argument("--trace", action="store_true", help="dump binary per-replication traces")
    sub.add_parser("verify", parents=[common], help="simulate and check every claim")
    return parser


def _apply_overrides(cfg, args):
    if args.seed is not None:
        cfg.sim = dataclasses.replace(cfg.sim, seed=args.seed)
    if args.out is not None:
        cfg.output_dir = args.out
    if args.format is not None:
        cfg.output_format = args.format
    return cfg


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _apply_overrides(parse_config(args.config), args)
    except (ConfigError, ModelValidationError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "analyze":
            report = {"schema_version": 1, "analytic": run_analyze(cfg)}
            out = Path(cfg.output_dir)
            out.mkdir(parents=True, exist_ok=True)
            (out / "report.json").write_text(
                json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n"
            )
            print(f"wrote {out / 'report.json'}")
            return EXIT_OK

        if args.command == "simulate":
            observers = [PathRecorder()]
            if args.trace:
                observers.append(TraceObserver(Path(cfg.output_dir) / "traces"))
            run_engine(cfg.model, cfg.sim, observers=observers)
            paths = observers[0].paths()
            est = estimate_local_time_rates(paths)
            summary = {
                "schema_version": 1,
                "seed": cfg.sim.seed,
                "replications": cfg.sim.replications,
                "horizon": cfg.sim.horizon,
                "local_time_rates": {
                    "e_T1": est.rates.e_T1,
                    "e_L1": est.rates.e_L1,
                    "e_L2": est.rates.e_L2,
                    "se": list(est.se),
                },
                "total_sticky_time": float(sum(p.total_sticky for p in paths)),
            }
            out = Path(cfg.output_dir)
            out.mkdir(parents=True, exist_ok=True)
            (out / "simulate_summary.json").write_text(
                json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n"
            )
            print(f"wrote {out / 'simulate_summary.json'}")
            return EXIT_OK

        # verify
        result: VerificationReport = run_verify(cfg)
        try:
            files = emit(result, cfg.output_format, cfg.output_dir)
        except OSError as exc:
            print(f"i/o error: {exc}", file=sys.stderr)
            return EXIT_IO
        for v in result.report["verdicts"]:
            status = "PASS" if v["pass"] else "FAIL"
            print(f"[{status}] {v['name']}: value={v['value']} tolerance={v['tolerance']}")
        print(f"wrote {len(files)} file(s) to {cfg.output_dir}")
        return EXIT_OK if result.passed else EXIT_VERIFY

    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except StickyTailsError as exc:
        print(f"verification error: {exc}", file=sys.stderr)
        return EXIT_VERIFY


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

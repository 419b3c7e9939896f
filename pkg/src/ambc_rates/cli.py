"""Command-line entry point: ``ambc-rates {rate,sweep,validate,waveform}``.

Exit codes: 0 all checks pass, 1 property violation, 2 configuration error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import campaign
from .config import ConfigError, load_config
from .params import DomainError

log = logging.getLogger("ambc_rates")

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file (defaults if omitted)")
    common.add_argument("--seed", type=int, help="64-bit RNG seed")
    common.add_argument("--samples", type=int, help="c_s draws per channel realization")
    common.add_argument("--out", help="output file (standard output if omitted)")
    common.add_argument("--workers", type=int, help="worker processes for sweep points")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="ambc-rates", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("rate", parents=[common], help="rates at a single parameter point")
    sw = sub.add_parser("sweep", parents=[common], help="rates along one parameter axis")
    sw.add_argument("--axis", choices=["p0", "kappa", "L", "beta", "distance"])
    sw.add_argument("--from", dest="from_", type=float)
    sw.add_argument("--to", type=float)
    sw.add_argument("--points", type=int)
    sw.add_argument("--log", action="store_true", default=None, help="log spacing")
    sw.add_argument("--linear", dest="log", action="store_false", help="linear spacing")
    va = sub.add_parser("validate", parents=[common], help="verify rate inequalities over random draws")
    va.add_argument("--draws", type=int, help="channel draws (overrides n_channel_draws)")
    wf = sub.add_parser("waveform", parents=[common], help="symbol-level SINR validation")
    wf.add_argument("--symbols", type=int, help="primary symbols per run")
    return p


def _overrides(args):
    ov = {}
    for flag, key in (("seed", "seed"), ("samples", "n_samples"), ("workers", "workers"), ("out", "output_path")):
        v = getattr(args, flag, None)
        if v is not None:
            ov[key] = v
    for flag, key in (
        ("axis", "sweep_axis"),
        ("from_", "sweep_from"),
        ("to", "sweep_to"),
        ("points", "sweep_points"),
        ("log", "sweep_log"),
        ("draws", "n_channel_draws"),
        ("symbols", "n_symbols"),
    ):
        v = getattr(args, flag, None)
        if v is not None:
            ov[key] = v
    return ov


def _emit(text: str, path: str) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        cfg = replace(cfg, **_overrides(args))
    except (ConfigError, DomainError) as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "rate":
            _emit(campaign.rate_csv(cfg), cfg.output_path)
            return EXIT_OK
        if args.command == "sweep":
            text = campaign.sweep_csv(cfg)
            _emit(text, cfg.output_path)
            n_warn = sum(1 for ln in text.splitlines() if ln.endswith(",mc_deviation"))
            if n_warn:
                log.warning("%d sweep rows flagged mc_deviation", n_warn)
            return EXIT_OK
        if args.command == "validate":
            results = campaign.run_validate(cfg)
            _emit(campaign.validate_csv(cfg, results), cfg.output_path)
            failed = [r for r in results if r.status == "fail"]
            for r in failed:
                print(f"property violated: {r.name} worst_margin={r.worst_margin} {r.detail}", file=sys.stderr)
            return EXIT_VIOLATION if failed else EXIT_OK
        if args.command == "waveform":
            rows = campaign.run_waveform(cfg)
            _emit(campaign.waveform_csv(cfg, rows), cfg.output_path)
            failed = [r[0] for r in rows if r[-1] != "true"]
            if failed:
                print(f"waveform checks outside tolerance: {', '.join(failed)}", file=sys.stderr)
            return EXIT_VIOLATION if failed else EXIT_OK
    except OSError as e:
        print(f"cannot write output: {e}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

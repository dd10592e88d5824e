"""Command-line entry point.

Exit codes: 0 success, 1 unexpected error, 2 bad configuration or usage,
3 numerical or certification failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import pipeline
from .config import load_config
from .errors import CertError, ConfigError
from .sampling import load_samples, save_samples
from .support import save_support

log = logging.getLogger("riskcert")

EXIT_OK, EXIT_UNEXPECTED, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="riskcert", description="Risk certificates for Bayesian neural network outputs.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, text in [
        ("plan", "print scenario and CVaR sample sizes"),
        ("sample", "draw output samples and write samples.csv"),
        ("fit", "fit the template support set and write support.json"),
        ("certify", "run the full pipeline and write report.json"),
        ("validate", "repeat the support fit and check holdout violation rates"),
    ]:
        s = sub.add_parser(name, help=text)
        s.add_argument("--config", required=True, help="YAML or JSON run configuration")
        s.add_argument("--seed", type=int, default=None, help="override the configured seed")
        s.add_argument("--out", default=None, help="output directory")
        s.add_argument("--threads", type=int, default=None, help="worker threads for sampling")
        if name == "fit":
            s.add_argument("--samples", default=None, help="fit to an existing samples.csv")
    return p


def _dump(obj) -> None:
    print(json.dumps(obj, indent=1, sort_keys=True))


def run(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config, seed=args.seed, threads=args.threads, out=args.out)
        out = Path(cfg.out)
        if args.command == "plan":
            res = pipeline.run_plan(cfg)
            print(f"scenario N = {res['scenario_N']}")
            for row in res["cvar"]:
                print(f"alpha={row['alpha']} beta={row['beta']} H={row['H']}: N = {row['N']}")
        elif args.command == "sample":
            samples = pipeline.run_sample(cfg)
            out.mkdir(parents=True, exist_ok=True)
            save_samples(samples, out / "samples.csv", h=cfg.perf)
            print(f"wrote {samples.N} samples to {out / 'samples.csv'}")
        elif args.command == "fit":
            samples = load_samples(args.samples) if args.samples else None
            fs = pipeline.run_fit(cfg, samples)
            out.mkdir(parents=True, exist_ok=True)
            save_support(fs, out / "support.json")
            for w in fs.warnings:
                log.warning(w)
            print(f"wrote support ({fs.template.L} directions, N={fs.N_used}) to {out / 'support.json'}")
        elif args.command == "certify":
            report = pipeline.run_certify(cfg)
            path = pipeline.write_report(report, out)
            _dump({"certificates": report["certificates"], "gamma_robustness": report["gamma_robustness"]})
            print(f"wrote {path}")
        elif args.command == "validate":
            res = pipeline.run_validate(cfg)
            out.mkdir(parents=True, exist_ok=True)
            (out / "validate.json").write_text(json.dumps(res, indent=1, sort_keys=True))
            print(
                f"failure fraction {res['failure_fraction']:.4f} (allowed {res['allowed_fraction']:.4f}): "
                + ("PASS" if res["passed"] else "FAIL")
            )
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CertError as exc:
        print(f"certification failed: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except Exception as exc:  # noqa: BLE001
        print(f"unexpected error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_UNEXPECTED
    return EXIT_OK


def main() -> None:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    sys.exit(run())

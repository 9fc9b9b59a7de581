"""Command line entry point: ``volterra-lab run`` and ``volterra-lab sweep``.

Exit status is 0 on success, 2 when the configuration (or an option derived
from it) is invalid and 3 when a computation fails numerically.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .config import ExperimentConfig
from .errors import ConfigError, DomainError, LabError, NumericalFailure

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3
OUT_ENV = "VOLTERRA_LAB_OUT"

log = logging.getLogger("volterra_lab")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="volterra-lab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="action", required=True)
    for name, helptext in (("run", "run the experiment named in the config"),
                           ("sweep", "run the config's parameter grid")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("config", nargs="?", help="TOML configuration file")
        s.add_argument("--config", dest="config_opt", metavar="PATH", help="TOML configuration file")
        s.add_argument("--seed", type=int, help="override the seed (non-negative integer)")
        s.add_argument("--out", help=f"output directory (default: ${OUT_ENV}, then the config, then ./volterra_out)")
        s.add_argument("--threads", type=int, help="worker threads for path simulation")
        s.add_argument("--verbose", "-v", action="store_true", help="log progress to stderr")
    return p


def _output_dir(arg: str | None, cfg: dict) -> Path:
    base = arg or os.environ.get(OUT_ENV) or cfg["output"]["dir"] or "volterra_out"
    return Path(base) / cfg["name"]


def main(argv: list[str] | None = None) -> int:
    from .experiments import run_experiment

    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    path = args.config_opt or args.config
    try:
        if path is None:
            raise ConfigError("config: no configuration file given")
        cfg = ExperimentConfig.from_file(path)
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.threads is not None:
            overrides["threads"] = args.threads
        if args.action == "sweep":
            if cfg.command != "sweep":
                overrides["sweep.command"] = cfg.command
                overrides["command"] = "sweep"
        if overrides:
            cfg = cfg.with_overrides(overrides)
        out = _output_dir(args.out, cfg.data)
        outcome = run_experiment(cfg, out, log=log.info)
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except LabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(outcome.out_dir / "report.json")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

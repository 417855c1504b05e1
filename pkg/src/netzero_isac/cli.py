"""Command line entry point.

    netzero-isac run <scenario> [--seed N] [--set key=value ...] [--out DIR]
    netzero-isac verify <scenario> [--seed N] [--set key=value ...]
    netzero-isac plot <result.csv> [--out FILE]

``<scenario>`` is a path to a JSON scenario file or the name of a bundled one
(default, figure4, figure5, figure6, figure7, rician_k50).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __doc__ as _package_doc, __version__
from .config import ScenarioFileError, bundled_scenarios, load_scenario, resolve_path
from .experiments import run_experiment, write_outputs
from .numerics import ConvergenceError, DomainError
from .plotscript import PlotError, emit_plot_script
from .verify import verify

EXIT_OK = 0
EXIT_FAILED_CHECK = 1
EXIT_INVALID = 2
EXIT_NUMERIC = 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="netzero-isac", description=_package_doc)
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def scenario_args(sp):
        sp.add_argument("scenario", help="scenario JSON file or bundled scenario name")
        sp.add_argument("--seed", type=int, help="override the Monte Carlo seed")
        sp.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a dotted key, e.g. system.p_s='20 dBm'")

    run = sub.add_parser("run", help="run the experiment and write CSV + manifest")
    scenario_args(run)
    run.add_argument("--out", help="output directory (default: output.directory of the file)")

    ver = sub.add_parser("verify", help="cross-check analytic, oracle and Monte Carlo values")
    scenario_args(ver)

    plot = sub.add_parser("plot", help="emit a gnuplot script for a result CSV")
    plot.add_argument("csv", help="result CSV written by 'run'")
    plot.add_argument("--out", help="write the script here instead of stdout")

    sub.add_parser("list", help="list bundled scenarios")
    return p


def _load(args):
    return load_scenario(resolve_path(args.scenario), args.overrides, args.seed)


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "list":
            for name, path in bundled_scenarios().items():
                print(f"{name}\t{path}")
            return EXIT_OK
        if args.command == "plot":
            text = emit_plot_script(Path(args.csv).read_text(), Path(args.csv).name)
            if args.out:
                Path(args.out).write_text(text)
            else:
                sys.stdout.write(text)
            return EXIT_OK
        loaded = _load(args)
        if args.command == "run":
            result = run_experiment(loaded)
            for path in write_outputs(loaded, result, args.out or loaded.output_dir):
                print(path)
            return EXIT_OK
        report = verify(loaded)
        print(report.text())
        return EXIT_OK if report.ok else EXIT_FAILED_CHECK
    except ScenarioFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (FileNotFoundError, PlotError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ConvergenceError, DomainError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

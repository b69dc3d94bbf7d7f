"""Command-line front end for the experiment runner.

Two forms:

    python -m smoothmpc.cli run --kind learn-homotopy --out runs/h \\
        [--config cfg.yaml] [--set learner.lr=0.01 ...] [--seeds 1,2,3]
    python -m smoothmpc.cli compare runs/h/learn-homotopy_1.csv \\
        runs/f/learn-fixed-tau_1.csv [--out comparison.json]

`run` executes one experiment kind and writes its CSV artifacts plus
manifest.json; `compare` reads two learning-trace CSVs and reports
convergence steps, J-curve areas, and per-step J differences as JSON.
Exit status is 0 on success and 2 on configuration or runtime errors,
with a diagnostic on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .experiment import ConfigError, KINDS, compare, load_config, run

log = logging.getLogger(__name__)


def _parse_seeds(text: str):
    try:
        return [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise ConfigError(f"--seeds: expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smoothmpc", description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    runp = sub.add_parser("run", help="run one experiment kind")
    runp.add_argument("--config", default=None, metavar="PATH",
                      help="YAML file overlaying the built-in defaults")
    runp.add_argument("--set", dest="sets", action="append", default=[],
                      metavar="KEY=VALUE",
                      help="dotted config override, e.g. learner.lr=0.01 (repeatable)")
    runp.add_argument("--out", default=None, metavar="DIR",
                      help="output directory (default from config)")
    runp.add_argument("--seeds", default=None, metavar="A,B,C",
                      help="comma-separated seed list (default from config)")
    runp.add_argument("--kind", default=None, choices=KINDS,
                      help="experiment kind (default from config)")

    cmp_ = sub.add_parser("compare", help="compare two learning-trace CSVs")
    cmp_.add_argument("trace_a", help="first trace CSV")
    cmp_.add_argument("trace_b", help="second trace CSV")
    cmp_.add_argument("--out", default=None, metavar="PATH",
                      help="write the comparison JSON here instead of stdout")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            sets = list(args.sets)
            if args.kind is not None:
                sets.append(f"kind={args.kind}")
            if args.out is not None:
                sets.append(f"out={args.out}")
            if args.seeds is not None:
                seeds = _parse_seeds(args.seeds)
                sets.append(f"seeds=[{', '.join(map(str, seeds))}]")
            cfg = load_config(args.config, tuple(sets))
            manifest = run(cfg)
            print(json.dumps(manifest["summary"], indent=2, sort_keys=True))
            return 0
        result = compare(args.trace_a, args.trace_b)
        text = json.dumps(result, indent=2, sort_keys=True)
        if args.out is not None:
            with open(args.out, "w") as fh:
                fh.write(text + "\n")
        else:
            print(text)
        return 0
    except (ConfigError, OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

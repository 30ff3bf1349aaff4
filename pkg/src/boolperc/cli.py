"""Command-line entry point: ``boolperc <experiment_kind> [--config ...] [--out ...]``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import KINDS
from .runner import EXIT_CONFIG, error_document, run_experiment


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="boolperc",
        description="Boolean percolation experiments on Poisson, Ginibre and GAF-zero point sets.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="kind", required=True, metavar="EXPERIMENT")
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run a '{kind}' experiment")
        p.add_argument("--config", type=Path, help="experiment config JSON")
        p.add_argument("--out", type=Path, help="output directory (default: config output.dir or ./out)")
        p.add_argument("--seed", type=int, help="master seed (overrides the config)")
        p.add_argument("--replicas", type=int, help="number of replicas (overrides n_samples)")
        p.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
        p.add_argument("--process", choices=("poisson", "ginibre", "gaf"),
                       help="process name when no config file is given")
    return parser


def _document(args) -> dict:
    if args.config is not None:
        doc = json.loads(args.config.read_text())
    else:
        doc = {"process": {"name": args.process or ("gaf" if args.kind == "fieldmin" else "poisson")}}
    if not isinstance(doc, dict):
        return doc
    doc.setdefault("experiment_kind", args.kind)
    if doc["experiment_kind"] != args.kind:
        raise ValueError(f"config experiment_kind {doc['experiment_kind']!r} does not match "
                         f"subcommand {args.kind!r}")
    if args.seed is not None:
        doc["master_seed"] = args.seed
    if args.replicas is not None:
        doc["n_samples"] = args.replicas
    return doc


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        doc = _document(args)
    except (OSError, ValueError) as exc:
        err = error_document("schema", str(exc), [{"path": "$", "message": str(exc)}])
        print(json.dumps(err, indent=2, sort_keys=True))
        return EXIT_CONFIG
    status, result = run_experiment(doc, args.out, threads=max(1, args.threads))
    if status != 0:
        print(json.dumps(result, indent=2, sort_keys=True))
    else:
        out = {"status": "ok", "experiment_kind": result["experiment_kind"],
               "artifacts": result.get("artifacts", []), "wall_time": result["wall_time"]}
        print(json.dumps(out, sort_keys=True))
    return status


if __name__ == "__main__":
    sys.exit(main())

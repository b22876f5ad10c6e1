"""Command-line entry point: ``interview-ie run --manifest ...``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from .config import BACKENDS, RunConfig, RunConfigError, load_run_config, validate
from .llm.backend import ENDPOINT_ENV
from .runner import run


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="interview-ie", description="Extract farm facts from interview transcripts.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="process every interview in a manifest")
    r.add_argument("--manifest", type=Path, help="CSV listing interview_id,path,domain_hint,annotations")
    r.add_argument("--backend", choices=BACKENDS, default=None)
    r.add_argument("--gold", type=Path, help="gold records CSV; enables evaluation")
    r.add_argument("--out", type=Path, help="output directory (default: out)")
    r.add_argument("--seed", type=int, help="bootstrap seed")
    r.add_argument("--workers", type=int, help="interviews processed in parallel")
    r.add_argument("--chat-endpoint", help=f"chat completions URL (or set {ENDPOINT_ENV})")
    r.add_argument("--replay", type=Path, help="replay file standing in for the chat model")
    r.add_argument("--config", type=Path, help="YAML file overriding resource paths and settings")
    r.add_argument("--validate-only", action="store_true", help="check configuration and exit")
    r.add_argument("-v", "--verbose", action="count", default=0)
    return p


def config_from_args(args: argparse.Namespace) -> RunConfig:
    flags = {"manifest": args.manifest, "backend": args.backend, "gold": args.gold, "out": args.out,
             "seed": args.seed, "workers": args.workers, "replay": args.replay,
             "chat_endpoint": args.chat_endpoint or os.environ.get(ENDPOINT_ENV) or None}
    if args.config is not None:
        return load_run_config(args.config, **flags)
    return RunConfig.with_defaults(**{k: v for k, v in flags.items() if v is not None})


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
    except (RunConfigError, OSError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.validate_only:
        diags = validate(cfg)
        for d in diags:
            print(d)
        print(f"{len(diags)} problem(s) found")
        return 2 if diags else 0
    summary = run(cfg)
    for d in summary.diagnostics:
        print(f"config error: {d}", file=sys.stderr)
    for o in summary.outcomes:
        counts = ", ".join(f"{b}={len(r)}" for b, r in sorted(o.records.items()))
        status = "FAILED" if o.failed else "ok"
        print(f"{o.interview_id}: {status} ({counts or 'no records'}; {len(o.errors)} error(s))")
    for b, total in summary.timings.backend_totals().items():
        print(f"{b} total: {total:.2f}s")
    return summary.exit_code


if __name__ == "__main__":
    sys.exit(main())

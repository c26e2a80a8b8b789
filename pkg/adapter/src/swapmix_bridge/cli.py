"""Console entry point: run a model over a job directory.

Exit codes: 0 on success, 1 on job or I/O errors, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import importlib
import sys
from pathlib import Path

from .runner import BridgeError, run_bridge


def resolve_model(spec: str):
    """Import "module.path:callable_name" and return the callable."""
    module_name, sep, attr_path = spec.partition(":")
    if not sep or not module_name or not attr_path:
        raise BridgeError(f"model spec must look like module:callable, got {spec!r}")
    try:
        obj = importlib.import_module(module_name)
    except ImportError as e:
        raise BridgeError(f"cannot import {module_name!r}: {e}") from e
    for part in attr_path.split("."):
        try:
            obj = getattr(obj, part)
        except AttributeError as e:
            raise BridgeError(f"{module_name!r} has no attribute {attr_path!r}") from e
    if not callable(obj):
        raise BridgeError(f"{spec!r} is not callable")
    return obj


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swapmix-bridge",
        description="Answer a swap-perturbation job directory with an external model.",
    )
    parser.add_argument("--job-dir", type=Path, required=True, help="job directory to answer")
    parser.add_argument(
        "--model", required=True,
        help="answer function as module:callable, e.g. mypkg.models:answer",
    )
    parser.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        build_parser().error(f"--jobs must be >= 1, got {args.jobs}")
    try:
        answer_fn = resolve_model(args.model)
        answered, already = run_bridge(args.job_dir, answer_fn, jobs=args.jobs)
    except (BridgeError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(f"answered {answered} pairs ({already} already done) -> {args.job_dir}/answers.jsonl")
    return 0


if __name__ == "__main__":
    sys.exit(main())

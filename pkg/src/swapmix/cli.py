"""Command line entry point.

Exit codes: 0 on success, 1 on data errors (bad inputs, incomplete logs,
I/O failures), 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .errors import IncompleteLog, SwapMixError
from .pipeline import (
    RunConfig,
    cmd_augment,
    cmd_diagnose,
    cmd_evaluate,
    cmd_export_bridge,
    cmd_import_bridge,
    cmd_perturb,
    cmd_plan,
)

_COMMANDS = {
    "diagnose": cmd_diagnose,
    "plan": cmd_plan,
    "perturb": cmd_perturb,
    "evaluate": cmd_evaluate,
    "augment": cmd_augment,
    "export-bridge": cmd_export_bridge,
    "import-bridge": cmd_import_bridge,
}


def _add_data_args(p: argparse.ArgumentParser, embeddings: bool = True) -> None:
    p.add_argument("--scene-graphs", type=Path, required=True, help="scene graph JSON file")
    p.add_argument("--questions", type=Path, required=True, help="question JSON file")
    if embeddings:
        p.add_argument("--embeddings", type=Path, required=True, help="word embedding text file")
        p.add_argument("--features", type=Path, help="directory of {image_id}.smfx files")


def _add_plan_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, default=10, help="class swaps per object (default 10)")
    p.add_argument(
        "--sim-threshold", type=float, default=0.5,
        help="minimum class similarity for swap candidates (default 0.5)",
    )
    p.add_argument(
        "--iou-threshold", type=float, default=0.5,
        help="minimum IoU to match a detection to an object (default 0.5)",
    )
    p.add_argument("--seed", type=int, default=0, help="seed for all randomized choices")
    p.add_argument(
        "--mode", choices=("frcnn", "perfect"), default="frcnn",
        help="feature source: detector files or encoded annotations",
    )
    p.add_argument(
        "--context-def", choices=("selected", "strict"), default="selected",
        help="how question-relevant objects are identified",
    )
    p.add_argument(
        "--encode-dim", type=int, default=32,
        help="feature dimension for perfect-sight encoding (default 32)",
    )


def _add_model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--model", choices=("symbolic", "baseline", "bridge"), default="symbolic",
        help="model to evaluate (bridge exports a job for an external model)",
    )
    p.add_argument("--jobs", type=int, default=1, help="worker threads (default 1)")
    p.add_argument("--train-scene-graphs", type=Path, help="baseline training scene graphs")
    p.add_argument("--train-questions", type=Path, help="baseline training questions")
    p.add_argument("--train-features", type=Path, help="baseline training feature directory")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument(
        "--print-config", action="store_true",
        help="print the resolved configuration as JSON and exit",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swapmix",
        description="Diagnose visual-context reliance of VQA models via feature swaps.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("diagnose", help="plan, perturb, and evaluate in one run")
    _add_data_args(p)
    _add_plan_args(p)
    _add_model_args(p)
    _add_common(p)
    p.add_argument("--dump-features", type=Path, help="also write every perturbed .smfx here")
    p.add_argument("--job-dir", type=Path, help="bridge job directory (model=bridge)")

    p = sub.add_parser("plan", help="write swap plans without perturbing")
    _add_data_args(p)
    _add_plan_args(p)
    _add_common(p)

    p = sub.add_parser("perturb", help="write perturbed feature files from a plan")
    _add_data_args(p)
    _add_plan_args(p)
    _add_common(p)
    p.add_argument("--dump-features", type=Path, help="feature output directory (default OUT/features)")

    p = sub.add_parser("evaluate", help="answer perturbations and compute the report")
    _add_data_args(p)
    _add_plan_args(p)
    _add_model_args(p)
    _add_common(p)
    p.add_argument("--answers", type=Path, help="evaluate an external answer log instead")

    p = sub.add_parser("augment", help="write one augmented feature file per question")
    _add_data_args(p)
    _add_plan_args(p)
    _add_common(p)
    p.add_argument("--p-swap", type=float, default=0.5, help="per-object swap probability")
    p.add_argument("--p-class", type=float, default=0.5, help="class-vs-attribute probability")
    p.add_argument("--epoch", type=int, default=0, help="epoch index mixed into the seed")

    p = sub.add_parser("export-bridge", help="write a job directory for an external model")
    _add_data_args(p)
    _add_plan_args(p)
    _add_common(p)
    p.add_argument("--job-dir", type=Path, help="job directory (default OUT)")

    p = sub.add_parser("import-bridge", help="score an answered bridge job")
    _add_data_args(p, embeddings=False)
    _add_common(p)
    p.add_argument("--job-dir", type=Path, required=True, help="answered job directory")

    return parser


def _config_from(args: argparse.Namespace) -> RunConfig:
    names = (
        "embeddings", "features", "k", "sim_threshold", "iou_threshold", "seed",
        "mode", "context_def", "model", "jobs", "dump_features", "encode_dim",
        "train_scene_graphs", "train_questions", "train_features",
        "p_swap", "p_class", "epoch", "answers", "job_dir",
    )
    extra = {n: getattr(args, n) for n in names if getattr(args, n, None) is not None}
    return RunConfig(
        scene_graphs=args.scene_graphs,
        questions=args.questions,
        out=args.out,
        **extra,
    )


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    needs_features = args.command != "import-bridge" and getattr(args, "mode", None) == "frcnn"
    if needs_features and args.features is None:
        parser.error(f"{args.command}: --features is required with --mode frcnn")
    try:
        cfg = _config_from(args)
    except ValueError as e:
        parser.error(str(e))
    if args.print_config:
        print(json.dumps(cfg.to_dict(), sort_keys=True, indent=2))
        return 0
    try:
        return _COMMANDS[args.command](cfg)
    except IncompleteLog as e:
        print(f"error: {e}", file=sys.stderr)
        for qid, pid in e.pairs[:20]:
            print(f"  {qid} pert {pid}", file=sys.stderr)
        if len(e.pairs) > 20:
            print(f"  ... and {len(e.pairs) - 20} more", file=sys.stderr)
        return 1
    except (SwapMixError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Helpers shared by the CLI-driving tests (importable, unlike conftest)."""

from swapmix import cli


def invoke_cli(*args: str) -> int:
    """Run the console entry point in-process, capturing argparse exits."""
    try:
        return cli.main([str(a) for a in args])
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 0


def symbolic_args(root, *, mode="perfect", context="strict", out):
    return [
        "--scene-graphs", str(root / "scene_graphs.json"),
        "--questions", str(root / "questions.json"),
        "--embeddings", str(root / "embeddings.txt"),
        "--mode", mode,
        "--context-def", context,
        "--encode-dim", "16",
        "--out", str(out),
    ]


def adversarial_args(root, *, out, train=True):
    args = [
        "--scene-graphs", str(root / "scene_graphs.json"),
        "--questions", str(root / "questions.json"),
        "--embeddings", str(root / "embeddings.txt"),
        "--features", str(root / "features"),
        "--mode", "frcnn",
        "--out", str(out),
    ]
    if train:
        args += [
            "--train-scene-graphs", str(root / "train_scene_graphs.json"),
            "--train-questions", str(root / "train_questions.json"),
            "--train-features", str(root / "train_features"),
        ]
    return args

"""Run an external answering function over a bridge job directory.

A job directory contains questions.jsonl, plans.jsonl, skips.jsonl, and
features/{question_id}.{pert_id}.smfx (pert 0 is the unperturbed input).
The runner answers every expected pair and appends to answers.jsonl. It
computes no metrics; scoring happens on the exporting side.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .smfx import read_smfx

FAILURE_ANSWER = "⟂"

AnswerFn = Callable[[np.ndarray, np.ndarray, str], str]


class BridgeError(ValueError):
    """Raised when a job directory is unusable."""


def _read_jsonl(path: Path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise BridgeError(f"{path}:{line_no}: {e}") from e
    return records


@dataclass
class BridgeJob:
    """Parsed job manifest: question texts and the pairs needing answers."""

    job_dir: Path
    texts: dict[str, str]
    pairs: list[tuple[str, int]]

    def feature_path(self, question_id: str, pert_id: int) -> Path:
        return self.job_dir / "features" / f"{question_id}.{pert_id}.smfx"


def load_job(job_dir: str | Path) -> BridgeJob:
    job = Path(job_dir)
    questions_path = job / "questions.jsonl"
    plans_path = job / "plans.jsonl"
    for required in (questions_path, plans_path):
        if not required.exists():
            raise BridgeError(f"{required} not found; not a bridge job directory")
    texts: dict[str, str] = {}
    for record in _read_jsonl(questions_path):
        texts[str(record["question_id"])] = str(record.get("text", ""))
    expected = {(qid, 0) for qid in texts}
    for record in _read_jsonl(plans_path):
        qid = str(record["question_id"])
        if qid not in texts:
            raise BridgeError(f"plans.jsonl references unknown question {qid!r}")
        expected.add((qid, int(record["pert_id"])))
    skips_path = job / "skips.jsonl"
    if skips_path.exists():
        for record in _read_jsonl(skips_path):
            expected.discard((str(record["question_id"]), int(record["pert_id"])))
    return BridgeJob(job, texts, sorted(expected))


def _answered_pairs(answers_path: Path) -> set[tuple[str, int]]:
    if not answers_path.exists():
        return set()
    done = set()
    for record in _read_jsonl(answers_path):
        done.add((str(record["question_id"]), int(record["pert_id"])))
    return done


def _answer_one(job: BridgeJob, answer_fn: AnswerFn, qid: str, pid: int) -> str:
    try:
        features, boxes = read_smfx(job.feature_path(qid, pid))
        answer = answer_fn(features, boxes, job.texts[qid])
        if not isinstance(answer, str) or not answer.strip():
            return FAILURE_ANSWER
        return answer
    except Exception:
        return FAILURE_ANSWER


def _answer_question(args: tuple) -> list[tuple[str, int, str]]:
    job, answer_fn, qid, pids = args
    return [(qid, pid, _answer_one(job, answer_fn, qid, pid)) for pid in pids]


def run_bridge(job_dir: str | Path, answer_fn: AnswerFn, jobs: int = 1) -> tuple[int, int]:
    """Answer every expected pair in the job; returns (answered, already done).

    Appends to answers.jsonl line by line, so an interrupted run resumes
    where it stopped. Per-pair model failures are recorded as the failure
    answer rather than aborting. With jobs > 1, questions fan out over a
    process pool (answer_fn must be picklable) and results are merged in
    question order.
    """
    if jobs < 1:
        raise ValueError(f"jobs must be >= 1, got {jobs}")
    job = load_job(job_dir)
    answers_path = job.job_dir / "answers.jsonl"
    done = _answered_pairs(answers_path)
    remaining = [pair for pair in job.pairs if pair not in done]
    if not remaining:
        return 0, len(done)

    def emit(f, qid: str, pid: int, answer: str) -> None:
        f.write(json.dumps(
            {"question_id": qid, "pert_id": pid, "answer": answer},
            sort_keys=True, separators=(",", ":"),
        ))
        f.write("\n")
        f.flush()

    if jobs == 1:
        with open(answers_path, "a", encoding="utf-8") as f:
            for qid, pid in remaining:
                emit(f, qid, pid, _answer_one(job, answer_fn, qid, pid))
        return len(remaining), len(done)

    by_question: dict[str, list[int]] = {}
    for qid, pid in remaining:
        by_question.setdefault(qid, []).append(pid)
    tasks = [(job, answer_fn, qid, pids) for qid, pids in sorted(by_question.items())]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        batches = list(pool.map(_answer_question, tasks))
    with open(answers_path, "a", encoding="utf-8") as f:
        for batch in batches:
            for qid, pid, answer in batch:
                emit(f, qid, pid, answer)
    return len(remaining), len(done)

"""Accuracy, context reliance, and effective accuracy from answer logs.

Reliance compares perturbed answers to the model's own unperturbed answer;
q_i compares every answer (including the unperturbed one) to ground truth.
Those are deliberately different comparisons and both are kept as defined.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Iterable

from .domain import Question
from .errors import IncompleteLog
from .models import AnswerLogEntry, normalize_answer
from .swapplan import KIND_ATTRIBUTE, KIND_CLASS, PlanRow

SCHEMA_VERSION = 1


def round2(x: float) -> float:
    """Percentages are reported to 2 decimals, round-half-even."""
    return float(f"{x:.2f}")


@dataclass(frozen=True)
class QuestionOutcome:
    question_id: str
    correct0: bool
    changed_by: tuple[int, ...]
    q_i: int


@dataclass(frozen=True)
class RobustnessReport:
    """Aggregated robustness numbers plus per-question outcomes."""

    n_total: int
    n: int
    n_correct0: int
    n_changed: int
    n_changed_class: int
    n_changed_attr: int
    n_q1: int
    n_skipped_swaps: int
    per_question: tuple[QuestionOutcome, ...]
    excluded: tuple[tuple[str, str], ...] = field(default_factory=tuple)

    @property
    def accuracy(self) -> float:
        return 100.0 * self.n_correct0 / self.n if self.n else 0.0

    @property
    def context_reliance(self) -> float:
        return 100.0 * self.n_changed / self.n_correct0 if self.n_correct0 else 0.0

    @property
    def class_reliance(self) -> float:
        return 100.0 * self.n_changed_class / self.n_correct0 if self.n_correct0 else 0.0

    @property
    def attr_reliance(self) -> float:
        return 100.0 * self.n_changed_attr / self.n_correct0 if self.n_correct0 else 0.0

    @property
    def effective_accuracy(self) -> float:
        return 100.0 * self.n_q1 / self.n if self.n else 0.0

    def identity_gap(self) -> float:
        """|effective − accuracy × (1 − reliance/100)| on reported values."""
        acc, rel = round2(self.accuracy), round2(self.context_reliance)
        return abs(round2(self.effective_accuracy) - acc * (1.0 - rel / 100.0))


def compute_report(
    questions: Iterable[Question],
    logs: Iterable[AnswerLogEntry],
    plan_rows: Iterable[PlanRow],
    skipped: Iterable[tuple[str, int, str]] = (),
    excluded: Iterable[tuple[str, str]] = (),
) -> RobustnessReport:
    """Aggregate an answer log into a RobustnessReport.

    The log must contain exactly one answer per evaluated question for
    pert_id 0 and for every planned, non-skipped pert_id; anything missing,
    duplicated with conflicts, or unexpected raises IncompleteLog.
    """
    questions = list(questions)
    excluded = tuple(excluded)
    excluded_ids = {qid for qid, _ in excluded}
    evaluated = [q for q in questions if q.question_id not in excluded_ids]
    kind_of: dict[tuple[str, int], str] = {}
    pert_ids: dict[str, set[int]] = {q.question_id: {0} for q in evaluated}
    for row in plan_rows:
        if row.question_id in excluded_ids:
            continue
        if row.question_id not in pert_ids:
            continue
        pert_ids[row.question_id].add(row.pert_id)
        kind_of[row.question_id, row.pert_id] = row.candidate.kind
    n_skipped = 0
    for qid, pid, _ in skipped:
        if qid in pert_ids and pid in pert_ids[qid]:
            pert_ids[qid].discard(pid)
            n_skipped += 1
    expected = {(qid, pid) for qid, pids in pert_ids.items() for pid in pids}
    answers: dict[tuple[str, int], str] = {}
    conflicts: list[tuple[str, int]] = []
    unexpected: list[tuple[str, int]] = []
    for entry in logs:
        pair = (entry.question_id, entry.pert_id)
        if entry.question_id in excluded_ids:
            continue
        if pair not in expected:
            unexpected.append(pair)
            continue
        if pair in answers and answers[pair] != entry.answer:
            conflicts.append(pair)
            continue
        answers[pair] = entry.answer
    if conflicts:
        raise IncompleteLog(
            f"{len(conflicts)} conflicting answer entr(ies)", sorted(set(conflicts))
        )
    if unexpected:
        raise IncompleteLog(
            f"{len(unexpected)} unexpected answer entr(ies)", sorted(set(unexpected))
        )
    missing = sorted(expected - set(answers))
    if missing:
        raise IncompleteLog(f"{len(missing)} missing answer entr(ies)", missing)

    outcomes: list[QuestionOutcome] = []
    n_correct0 = n_changed = n_changed_class = n_changed_attr = n_q1 = 0
    for q in evaluated:
        qid = q.question_id
        base = answers[qid, 0]
        correct0 = base == normalize_answer(q.gt_answer)
        changed_by = tuple(
            sorted(
                pid
                for pid in pert_ids[qid]
                if pid != 0 and answers[qid, pid] != base
            )
        )
        q_i = 1 if correct0 and not changed_by else 0
        if correct0:
            n_correct0 += 1
            if changed_by:
                n_changed += 1
                kinds = {kind_of[qid, pid] for pid in changed_by}
                if KIND_CLASS in kinds:
                    n_changed_class += 1
                if KIND_ATTRIBUTE in kinds:
                    n_changed_attr += 1
        n_q1 += q_i
        outcomes.append(QuestionOutcome(qid, correct0, changed_by, q_i))
    return RobustnessReport(
        n_total=len(questions),
        n=len(evaluated),
        n_correct0=n_correct0,
        n_changed=n_changed,
        n_changed_class=n_changed_class,
        n_changed_attr=n_changed_attr,
        n_q1=n_q1,
        n_skipped_swaps=n_skipped,
        per_question=tuple(outcomes),
        excluded=excluded,
    )


def report_as_dict(report: RobustnessReport) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "n_total": report.n_total,
        "n": report.n,
        "counts": {
            "correct0": report.n_correct0,
            "changed": report.n_changed,
            "changed_class": report.n_changed_class,
            "changed_attr": report.n_changed_attr,
            "q1": report.n_q1,
            "skipped_swaps": report.n_skipped_swaps,
        },
        "accuracy": round2(report.accuracy),
        "context_reliance": round2(report.context_reliance),
        "effective_accuracy": round2(report.effective_accuracy),
        "class_reliance": round2(report.class_reliance),
        "attr_reliance": round2(report.attr_reliance),
        "excluded": [
            {"question_id": qid, "reason": reason} for qid, reason in report.excluded
        ],
        "per_question": [
            {
                "question_id": o.question_id,
                "correct0": o.correct0,
                "changed_by": list(o.changed_by),
                "q_i": o.q_i,
            }
            for o in report.per_question
        ],
    }


def emit_report(report: RobustnessReport, format: str = "json") -> str:
    """Serialize a report canonically as json, text, or csv."""
    if format == "json":
        return json.dumps(report_as_dict(report), sort_keys=True, indent=2) + "\n"
    if format == "text":
        cells = [
            f"{round2(report.accuracy):.2f}",
            f"{round2(report.context_reliance):.2f}",
            f"{round2(report.effective_accuracy):.2f}",
        ]
        header = ["Acc.", "Context Reliance", "Effective Acc."]
        widths = [max(len(h), len(c)) for h, c in zip(header, cells)]
        lines = [
            f"questions evaluated: {report.n} of {report.n_total}"
            f" ({len(report.excluded)} excluded, {report.n_skipped_swaps} swaps skipped)",
            "  ".join(h.ljust(w) for h, w in zip(header, widths)),
            "  ".join(c.ljust(w) for c, w in zip(cells, widths)),
            f"class reliance: {round2(report.class_reliance):.2f}"
            f"  attribute reliance: {round2(report.attr_reliance):.2f}",
        ]
        return "\n".join(lines) + "\n"
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(
            [
                "n_total", "n", "excluded", "skipped_swaps", "accuracy",
                "context_reliance", "effective_accuracy", "class_reliance",
                "attr_reliance", "correct0", "changed", "q1",
            ]
        )
        writer.writerow(
            [
                report.n_total, report.n, len(report.excluded), report.n_skipped_swaps,
                f"{round2(report.accuracy):.2f}",
                f"{round2(report.context_reliance):.2f}",
                f"{round2(report.effective_accuracy):.2f}",
                f"{round2(report.class_reliance):.2f}",
                f"{round2(report.attr_reliance):.2f}",
                report.n_correct0, report.n_changed, report.n_q1,
            ]
        )
        return buf.getvalue()
    raise ValueError(f"unknown report format {format!r}")

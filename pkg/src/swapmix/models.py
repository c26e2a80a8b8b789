"""Built-in reference models and the file bridge to external ones.

Two models ship with the toolkit: a symbolic executor that interprets
ground-truth reasoning programs against the scene graph (the perfect-sight
ideal, immune to context swaps under the strict context definition), and a
deliberately context-sensitive baseline that retrieves answers by nearest
mean feature. External models plug in through a job-directory protocol.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping

import numpy as np

from .domain import FeatureMatrix, ObjectAnnotation, Question, SceneGraph
from .errors import (
    AmbiguousSelection,
    IncompleteLog,
    MalformedInput,
    ModelFailure,
    UnsupportedOperation,
)
from .ingestion import DatasetBundle, write_feature_file
from .swapplan import PlanRow, SwapPlan, read_plan_file, write_plan_file

FAILURE_ANSWER = "⟂"

# Category lexicon used by query steps ("query color" etc.). GQA queries
# attribute categories, not raw attributes, so the executor needs to know
# which attributes belong to which category.
ATTRIBUTE_CATEGORIES: Mapping[str, frozenset[str]] = {
    "color": frozenset(
        {
            "red", "blue", "green", "yellow", "orange", "purple", "black",
            "white", "brown", "gray", "silver", "tan", "pink", "gold", "beige",
        }
    ),
    "size": frozenset({"small", "large", "tiny", "huge", "little", "big"}),
    "material": frozenset(
        {
            "wooden", "metal", "plastic", "glass", "leather", "concrete",
            "brick", "cloth", "rubber", "steel", "ceramic", "stone",
        }
    ),
    "shape": frozenset({"round", "square", "rectangular", "triangular", "octagonal"}),
}


def normalize_answer(answer: object) -> str:
    """Lowercase, trim, and collapse internal whitespace."""
    return " ".join(str(answer).split()).lower()


@dataclass(frozen=True)
class AnswerLogEntry:
    """One model answer for one (question, perturbation) pair."""

    question_id: str
    pert_id: int
    answer: str


def _dependency_state(results: list[object], dependencies: tuple[int, ...]) -> tuple[
    frozenset[str], list[str]
]:
    selection: set[str] = set()
    answers: list[str] = []
    for dep in dependencies:
        value = results[dep]
        if isinstance(value, frozenset):
            selection |= value
        else:
            answers.append(value)
    return frozenset(selection), answers


def _query_value(obj: ObjectAnnotation, category: str) -> str:
    if category == "name":
        return obj.class_label
    lexicon = ATTRIBUTE_CATEGORIES.get(category)
    if lexicon is None:
        raise UnsupportedOperation(f"unknown query category {category!r}")
    values = sorted(obj.attributes & lexicon)
    if not values:
        raise UnsupportedOperation(f"object {obj.object_id} has no {category} attribute")
    if len(values) > 1:
        raise AmbiguousSelection(
            f"object {obj.object_id} has multiple {category} attributes: {values}"
        )
    return values[0]


def _sole_selected(selection: frozenset[str], operation: str) -> str:
    if len(selection) != 1:
        raise AmbiguousSelection(f"{operation} over {len(selection)} objects")
    return next(iter(selection))


def symbolic_execute(program: Iterable, g: SceneGraph) -> str:
    """Interpret a reasoning program literally against the scene graph."""
    object_map = g.object_map()
    results: list[object] = []
    for step in program:
        selection, answers = _dependency_state(results, step.dependencies)
        op, args = step.operation, step.arguments
        result: object
        if op == "select":
            if not args:
                raise UnsupportedOperation("select without a class argument")
            result = frozenset(
                oid for oid, o in object_map.items() if o.class_label == args[0]
            )
        elif op == "filter":
            if not args:
                raise UnsupportedOperation("filter without an attribute argument")
            result = frozenset(
                oid for oid in selection if args[-1] in object_map[oid].attributes
            )
        elif op == "relate":
            if len(args) < 3 or args[-1] not in ("s", "o"):
                raise UnsupportedOperation(f"relate arguments {args!r} not understood")
            target_class, predicate, direction = args[0], args[1], args[-1]
            found = set()
            for rel in g.relations:
                if rel.predicate != predicate:
                    continue
                if direction == "s":
                    candidate, anchor = rel.subject_id, rel.object_id
                else:
                    candidate, anchor = rel.object_id, rel.subject_id
                if anchor not in selection or candidate not in object_map:
                    continue
                if target_class == "_" or object_map[candidate].class_label == target_class:
                    found.add(candidate)
            result = frozenset(found)
        elif op == "query":
            if not args:
                raise UnsupportedOperation("query without a category argument")
            obj = object_map[_sole_selected(selection, "query")]
            result = _query_value(obj, args[-1])
        elif op == "verify":
            if not args:
                raise UnsupportedOperation("verify without an attribute argument")
            result = (
                "yes"
                if any(args[-1] in object_map[oid].attributes for oid in selection)
                else "no"
            )
        elif op == "exist":
            result = "yes" if selection else "no"
        elif op == "choose":
            if not args or "|" not in args[-1]:
                raise UnsupportedOperation(f"choose options {args!r} not understood")
            options = [o.strip() for o in args[-1].split("|") if o.strip()]
            obj = object_map[_sole_selected(selection, "choose")]
            matched = [
                o for o in options if o == obj.class_label or o in obj.attributes
            ]
            if not matched:
                raise UnsupportedOperation(
                    f"none of {options} applies to object {obj.object_id}"
                )
            if len(matched) > 1:
                raise AmbiguousSelection(f"{matched} all apply to object {obj.object_id}")
            result = matched[0]
        elif op in ("and", "or"):
            if len(answers) < 2 or any(a not in ("yes", "no") for a in answers):
                raise UnsupportedOperation(f"{op} needs two yes/no dependencies")
            truth = [a == "yes" for a in answers]
            result = ("yes" if all(truth) else "no") if op == "and" else (
                "yes" if any(truth) else "no"
            )
        else:
            raise UnsupportedOperation(f"operation {op!r} not supported")
        results.append(result)
    final = results[-1] if results else None
    if not isinstance(final, str):
        raise UnsupportedOperation("final step does not produce an answer")
    return normalize_answer(final)


def symbolic_execute_on_swapped(
    program: Iterable,
    g: SceneGraph,
    swaps: Mapping[str, tuple[str, frozenset[str]]],
) -> str:
    """Execute after rewriting swapped objects' class/attributes in g.

    This is the annotation-level counterpart of a feature swap: each entry
    maps object_id to its (donor_class, donor_attributes).
    """
    object_map = g.object_map()
    replacements = {}
    for object_id, (donor_class, donor_attributes) in swaps.items():
        source = object_map[object_id]
        replacements[object_id] = ObjectAnnotation(
            object_id=object_id,
            class_label=donor_class,
            attributes=frozenset(donor_attributes),
            bbox=source.bbox,
        )
    return symbolic_execute(program, g.replace_objects(replacements))


def _safe_cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu, nv = float(np.linalg.norm(u)), float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return -2.0
    return float(np.dot(u.astype(np.float64), v.astype(np.float64)) / (nu * nv))


class BaselineModel:
    """Retrieval model keyed on the question's final step.

    Answers with the training example closest in cosine over the mean of
    all object features. Because a single-row swap provably moves the
    mean, this model exhibits measurable context reliance by design.
    """

    def __init__(
        self,
        entries: Mapping[tuple, list[tuple[np.ndarray, str]]],
        majority: str | None,
    ):
        self._entries = dict(entries)
        self._majority = majority

    @staticmethod
    def question_key(q: Question) -> tuple:
        final = q.final_step()
        return (final.operation, final.arguments)

    @classmethod
    def fit(
        cls,
        bundle: DatasetBundle,
        features: Mapping[str, tuple[FeatureMatrix, tuple]] | None = None,
    ) -> "BaselineModel":
        feats = bundle.features if features is None else features
        entries: dict[tuple, list[tuple[np.ndarray, str]]] = {}
        counts: Counter[str] = Counter()
        for q in bundle.questions:
            loaded = feats.get(q.image_id)
            if loaded is None:
                continue
            answer = normalize_answer(q.gt_answer)
            mean = loaded[0].rows.mean(axis=0)
            entries.setdefault(cls.question_key(q), []).append((mean, answer))
            counts[answer] += 1
        majority = None
        if counts:
            top = max(counts.values())
            majority = min(a for a, c in counts.items() if c == top)
        return cls(entries, majority)

    def answer(self, V: FeatureMatrix, q: Question) -> str:
        bucket = self._entries.get(self.question_key(q))
        if not bucket:
            if self._majority is None:
                raise ModelFailure("baseline model has no training examples")
            return self._majority
        mean = V.rows.mean(axis=0)
        best_answer, best_score = bucket[0][1], -3.0
        for vec, answer in bucket:
            score = _safe_cosine(mean, vec)
            if score > best_score:
                best_answer, best_score = answer, score
        return best_answer


def model_answer(model, V: FeatureMatrix | None, q: Question) -> str:
    """Single normalized answer; any model fault becomes the failure answer."""
    try:
        return normalize_answer(model.answer(V, q))
    except Exception:
        return FAILURE_ANSWER


def _write_jsonl(path: Path, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps(record, sort_keys=True, separators=(",", ":")))
            f.write("\n")


def _read_jsonl(path: Path) -> Iterator[dict]:
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as e:
                raise MalformedInput(f"{path}:{line_no}: {e}") from e


def write_answer_file(path: str | Path, entries: Iterable[AnswerLogEntry]) -> None:
    _write_jsonl(
        Path(path),
        (
            {
                "question_id": e.question_id,
                "pert_id": e.pert_id,
                "answer": normalize_answer(e.answer) if e.answer != FAILURE_ANSWER else e.answer,
            }
            for e in entries
        ),
    )


def read_answer_file(path: str | Path) -> list[AnswerLogEntry]:
    entries = []
    for raw in _read_jsonl(Path(path)):
        try:
            answer = str(raw["answer"])
            if answer != FAILURE_ANSWER:
                answer = normalize_answer(answer)
            entries.append(
                AnswerLogEntry(str(raw["question_id"]), int(raw["pert_id"]), answer)
            )
        except (KeyError, TypeError, ValueError) as e:
            raise MalformedInput(f"{path}: bad answer entry {raw!r}: {e}") from e
    return entries


def write_skips_file(path: str | Path, skips: Iterable[tuple[str, int, str]]) -> None:
    _write_jsonl(
        Path(path),
        ({"question_id": q, "pert_id": p, "reason": r} for q, p, r in skips),
    )


def read_skips_file(path: str | Path) -> list[tuple[str, int, str]]:
    return [
        (str(raw["question_id"]), int(raw["pert_id"]), str(raw["reason"]))
        for raw in _read_jsonl(Path(path))
    ]


def write_questions_file(path: str | Path, questions: Iterable[Question]) -> None:
    _write_jsonl(
        Path(path),
        (
            {"question_id": q.question_id, "image_id": q.image_id, "text": q.text}
            for q in questions
        ),
    )


def read_questions_file(path: str | Path) -> list[dict]:
    return list(_read_jsonl(Path(path)))


def validate_answer_log(
    entries: Iterable[AnswerLogEntry], expected: set[tuple[str, int]]
) -> dict[tuple[str, int], str]:
    """Check one answer per expected pair; returns the deduplicated map."""
    seen: dict[tuple[str, int], str] = {}
    conflicts: list[tuple[str, int]] = []
    unexpected: list[tuple[str, int]] = []
    for e in entries:
        pair = (e.question_id, e.pert_id)
        if pair not in expected:
            unexpected.append(pair)
            continue
        if pair in seen and seen[pair] != e.answer:
            conflicts.append(pair)
            continue
        seen[pair] = e.answer
    if conflicts:
        raise IncompleteLog(
            f"{len(conflicts)} conflicting answer entr(ies)", sorted(set(conflicts))
        )
    if unexpected:
        raise IncompleteLog(
            f"{len(unexpected)} unexpected answer entr(ies)", sorted(set(unexpected))
        )
    missing = sorted(expected - set(seen))
    if missing:
        raise IncompleteLog(f"{len(missing)} missing answer entr(ies)", missing)
    return seen


def expected_pairs(
    question_ids: Iterable[str],
    plan_rows: Iterable[PlanRow],
    skips: Iterable[tuple[str, int, str]] = (),
) -> set[tuple[str, int]]:
    """Every (question_id, pert_id) a complete log must contain."""
    expected = {(qid, 0) for qid in question_ids}
    expected.update((row.question_id, row.pert_id) for row in plan_rows)
    expected.difference_update((q, p) for q, p, _ in skips)
    return expected


def bridge_export(
    job_dir: str | Path,
    questions: Iterable[Question],
    plans: Iterable[SwapPlan],
    perturbation_stream: Iterable,
) -> Path:
    """Write a bridge job directory for an external model.

    The stream yields (question_id, pert_id, FeatureMatrix, bboxes,
    skip_reason); entries with a skip reason get no feature file and are
    recorded in skips.jsonl. pert_id 0 carries the unperturbed features.
    """
    job = Path(job_dir)
    features_dir = job / "features"
    features_dir.mkdir(parents=True, exist_ok=True)
    write_questions_file(job / "questions.jsonl", questions)
    write_plan_file(job / "plans.jsonl", plans)
    skips: list[tuple[str, int, str]] = []
    for question_id, pert_id, matrix, bboxes, skip_reason in perturbation_stream:
        if skip_reason is not None:
            skips.append((question_id, pert_id, skip_reason))
            continue
        write_feature_file(features_dir / f"{question_id}.{pert_id}.smfx", matrix, bboxes)
    write_skips_file(job / "skips.jsonl", skips)
    return job


def bridge_import(job_dir: str | Path) -> list[AnswerLogEntry]:
    """Read and validate answers.jsonl against the job's own manifest."""
    job = Path(job_dir)
    answers_path = job / "answers.jsonl"
    if not answers_path.exists():
        raise MalformedInput(f"{answers_path} not found; run the bridge adapter first")
    question_ids = [str(r["question_id"]) for r in read_questions_file(job / "questions.jsonl")]
    plan_rows = read_plan_file(job / "plans.jsonl")
    skips_path = job / "skips.jsonl"
    skips = read_skips_file(skips_path) if skips_path.exists() else []
    expected = expected_pairs(question_ids, plan_rows, skips)
    answers = validate_answer_log(read_answer_file(answers_path), expected)
    return [
        AnswerLogEntry(qid, pid, answers[qid, pid]) for qid, pid in sorted(answers)
    ]

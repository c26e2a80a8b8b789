"""Plan the feature swaps for each question's context objects.

Every context object gets k class-swap candidates (similar classes by
embedding cosine, padded with random classes when the similarity threshold
leaves fewer than k) and up to k attribute-swap candidates (same class,
different attributes). Candidate selection is seeded per (seed, question,
object) so plans are reproducible and independent of processing order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .context import MatchTable
from .domain import ContextSet, EmbeddingTable, ObjectAnnotation, Question
from .errors import EmptyClass, MalformedInput
from .ingestion import DatasetBundle
from .seeding import rng_from

KIND_CLASS = "class"
KIND_ATTRIBUTE = "attribute"


@dataclass(frozen=True)
class SwapCandidate:
    """One planned feature swap for a single context object."""

    kind: str
    source_detection_index: int
    donor_image: str | None
    donor_object: str | None
    donor_class: str
    donor_attributes: frozenset[str]
    padded: bool = False

    def __post_init__(self) -> None:
        if self.kind not in (KIND_CLASS, KIND_ATTRIBUTE):
            raise ValueError(f"unknown swap kind {self.kind!r}")


@dataclass(frozen=True)
class SwapPlan:
    """All swap candidates for one question, ordered by detection index."""

    question_id: str
    per_object: tuple[tuple[int, tuple[SwapCandidate, ...]], ...]
    k: int
    seed: int

    def candidates(self) -> Iterator[tuple[int, SwapCandidate]]:
        """Yield (pert_id, candidate) with pert_ids dense from 1."""
        pert_id = 1
        for _, cands in self.per_object:
            for cand in cands:
                yield pert_id, cand
                pert_id += 1

    @property
    def total(self) -> int:
        return sum(len(cands) for _, cands in self.per_object)


def class_candidates(
    label: str,
    table: EmbeddingTable,
    all_classes: Iterable[str],
    k: int,
    threshold: float,
    rng: np.random.Generator | None = None,
    allow_fallback: bool = True,
) -> list[tuple[str, bool]]:
    """Rank donor classes for a class swap; pad to k with random classes.

    Returns (class, padded) pairs: unpadded entries are the most
    embedding-similar classes at or above the threshold, in descending
    similarity (ties lexicographic); padded entries are uniform draws from
    the remaining vocabulary. Shorter than k only when the vocabulary runs
    out.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not -1 <= threshold <= 1:
        raise ValueError(f"threshold must be in [-1, 1], got {threshold}")
    classes = set(all_classes)
    if label not in classes:
        raise ValueError(f"label {label!r} not in class vocabulary")
    if rng is None:
        rng = rng_from("class-pad", label)
    scored = [
        (c, table.similarity(label, c, allow_fallback=allow_fallback))
        for c in sorted(classes - {label})
    ]
    scored.sort(key=lambda cs: (-cs[1], cs[0]))
    picked = [(c, False) for c, s in scored if s >= threshold][:k]
    pool = sorted(classes - {label} - {c for c, _ in picked})
    shortfall = min(k - len(picked), len(pool))
    if shortfall > 0:
        order = rng.permutation(len(pool))
        picked.extend((pool[int(i)], True) for i in order[:shortfall])
    return picked


def attribute_candidates(
    source: ObjectAnnotation,
    bundle: DatasetBundle,
    k: int,
    rng: np.random.Generator | None = None,
    source_image: str | None = None,
) -> list[tuple[str, str]]:
    """Pick up to k same-class donors whose attribute sets differ.

    Returns (image_id, object_id) pairs. When fewer than k donors exist
    the full list is returned in canonical order; otherwise k are sampled
    without replacement.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    donors = [
        (image_id, object_id)
        for image_id, object_id in bundle.class_index.get(source.class_label, ())
        if (image_id, object_id) != (source_image, source.object_id)
        and bundle.annotation(image_id, object_id).attributes != source.attributes
    ]
    if len(donors) <= k:
        return donors
    if rng is None:
        rng = rng_from("attr-donor", source.class_label)
    chosen = rng.choice(len(donors), size=k, replace=False)
    return [donors[int(i)] for i in chosen]


def attribute_candidates_perfect(
    source: ObjectAnnotation,
    table: EmbeddingTable,
    all_attributes: Iterable[str],
    k: int,
    allow_fallback: bool = True,
) -> list[str]:
    """Top-k attributes most similar to the source's canonical attribute.

    The canonical attribute is the lexicographically smallest one. Ranking
    matches class_candidates (descending cosine, lexicographic ties) but
    there is no threshold and no padding.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not source.attributes:
        raise ValueError(f"object {source.object_id} has no attributes")
    canonical = min(source.attributes)
    scored = [
        (a, table.similarity(canonical, a, allow_fallback=allow_fallback))
        for a in sorted(set(all_attributes) - {canonical})
    ]
    scored.sort(key=lambda cs: (-cs[1], cs[0]))
    return [a for a, _ in scored[:k]]


def build_swap_plan(
    q: Question,
    ctx: ContextSet,
    mt: MatchTable,
    bundle: DatasetBundle,
    table: EmbeddingTable,
    k: int,
    threshold: float,
    seed: int,
    mode: str = "frcnn",
    allow_fallback: bool = True,
) -> SwapPlan:
    """Build the full swap plan for one question.

    Context detections without a matched ground-truth object contribute no
    candidates (their class is unknown). In "frcnn" mode attribute donors
    are real same-class objects; in "perfect" mode they are synthetic
    attribute substitutions on the source object (donor_image/donor_object
    left unset). Class candidates are identical across modes.
    """
    if ctx.question_id != q.question_id:
        raise ValueError(
            f"context set for {ctx.question_id!r} used with question {q.question_id!r}"
        )
    if mode not in ("frcnn", "perfect"):
        raise ValueError(f"unknown mode {mode!r}")
    graph = bundle.scene_graphs[q.image_id]
    object_map = graph.object_map()
    per_object: list[tuple[int, tuple[SwapCandidate, ...]]] = []
    for j in ctx.context_indices:
        object_id = mt.object_for(j)
        if object_id is None:
            per_object.append((j, ()))
            continue
        source = object_map[object_id]
        cands: list[SwapCandidate] = []
        pad_rng = rng_from(seed, q.question_id, object_id, "pad")
        donor_rng = rng_from(seed, q.question_id, object_id, "donor")
        for donor_class, padded in class_candidates(
            source.class_label, table, bundle.all_classes, k, threshold,
            rng=pad_rng, allow_fallback=allow_fallback,
        ):
            instances = bundle.class_index.get(donor_class, ())
            if not instances:
                raise EmptyClass(f"no instances of class {donor_class!r}")
            donor_image, donor_object = instances[int(donor_rng.integers(len(instances)))]
            cands.append(
                SwapCandidate(
                    kind=KIND_CLASS,
                    source_detection_index=j,
                    donor_image=donor_image,
                    donor_object=donor_object,
                    donor_class=donor_class,
                    donor_attributes=bundle.annotation(donor_image, donor_object).attributes,
                    padded=padded,
                )
            )
        if mode == "perfect":
            if source.attributes:
                canonical = min(source.attributes)
                for new_attribute in attribute_candidates_perfect(
                    source, table, bundle.attribute_vocabulary, k,
                    allow_fallback=allow_fallback,
                ):
                    cands.append(
                        SwapCandidate(
                            kind=KIND_ATTRIBUTE,
                            source_detection_index=j,
                            donor_image=None,
                            donor_object=None,
                            donor_class=source.class_label,
                            donor_attributes=(source.attributes - {canonical})
                            | {new_attribute},
                        )
                    )
        else:
            attr_rng = rng_from(seed, q.question_id, object_id, "attr")
            for donor_image, donor_object in attribute_candidates(
                source, bundle, k, rng=attr_rng, source_image=q.image_id
            ):
                donor = bundle.annotation(donor_image, donor_object)
                cands.append(
                    SwapCandidate(
                        kind=KIND_ATTRIBUTE,
                        source_detection_index=j,
                        donor_image=donor_image,
                        donor_object=donor_object,
                        donor_class=donor.class_label,
                        donor_attributes=donor.attributes,
                    )
                )
        per_object.append((j, tuple(cands)))
    return SwapPlan(
        question_id=q.question_id, per_object=tuple(per_object), k=k, seed=seed
    )


@dataclass(frozen=True)
class PlanRow:
    """One deserialized plan line: a candidate with its assigned pert_id."""

    question_id: str
    pert_id: int
    candidate: SwapCandidate


def plan_records(plan: SwapPlan) -> Iterator[dict]:
    """Serializable dicts for each candidate, in pert_id order."""
    for pert_id, c in plan.candidates():
        yield {
            "question_id": plan.question_id,
            "pert_id": pert_id,
            "detection_index": c.source_detection_index,
            "kind": c.kind,
            "donor_image": c.donor_image,
            "donor_object": c.donor_object,
            "donor_class": c.donor_class,
            "donor_attributes": sorted(c.donor_attributes),
            "padded": c.padded,
        }


def write_plan_file(path: str | Path, plans: Iterable[SwapPlan]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for plan in plans:
            for record in plan_records(plan):
                f.write(json.dumps(record, sort_keys=True, separators=(",", ":")))
                f.write("\n")


def read_plan_file(path: str | Path) -> list[PlanRow]:
    rows: list[PlanRow] = []
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
                candidate = SwapCandidate(
                    kind=raw["kind"],
                    source_detection_index=int(raw["detection_index"]),
                    donor_image=raw["donor_image"],
                    donor_object=raw["donor_object"],
                    donor_class=raw["donor_class"],
                    donor_attributes=frozenset(raw["donor_attributes"]),
                    padded=bool(raw["padded"]),
                )
                rows.append(PlanRow(str(raw["question_id"]), int(raw["pert_id"]), candidate))
            except (KeyError, TypeError, ValueError, json.JSONDecodeError) as e:
                raise MalformedInput(f"{path}:{line_no}: bad plan row: {e}") from e
    return rows

"""Split each image's detections into question-relevant and context rows.

Ground-truth reasoning steps name the objects a question actually needs;
everything else detected in the image is visual context and therefore fair
game for feature swaps.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .domain import ContextSet, DetectedObject, Question, SceneGraph, iou
from .errors import ImageMismatch


@dataclass(frozen=True)
class MatchTable:
    """Injective mapping from ground-truth objects to detection rows."""

    image_id: str
    matches: Mapping[str, int]
    scores: Mapping[tuple[str, int], float]
    n_detections: int

    def detection_for(self, object_id: str) -> int | None:
        return self.matches.get(object_id)

    def object_for(self, detection_index: int) -> str | None:
        for object_id, det in self.matches.items():
            if det == detection_index:
                return object_id
        return None

    @property
    def matched_detections(self) -> frozenset[int]:
        return frozenset(self.matches.values())


def match_detections(
    g: SceneGraph, dets: list[DetectedObject], iou_threshold: float = 0.5
) -> MatchTable:
    """Greedily match detections to ground-truth objects by descending IoU.

    Ties break on lexicographic object_id, then detection_index, so the
    result is deterministic. Pairs below the threshold stay unmatched.
    """
    if not 0 < iou_threshold <= 1:
        raise ValueError(f"iou_threshold must be in (0, 1], got {iou_threshold}")
    scores: dict[tuple[str, int], float] = {}
    candidates: list[tuple[float, str, int]] = []
    for obj in g.objects:
        for det in dets:
            score = iou(obj.bbox, det.bbox)
            if score > 0:
                scores[obj.object_id, det.detection_index] = score
            if score >= iou_threshold:
                candidates.append((score, obj.object_id, det.detection_index))
    candidates.sort(key=lambda c: (-c[0], c[1], c[2]))
    matches: dict[str, int] = {}
    used_detections: set[int] = set()
    for _, object_id, detection_index in candidates:
        if object_id in matches or detection_index in used_detections:
            continue
        matches[object_id] = detection_index
        used_detections.add(detection_index)
    return MatchTable(
        image_id=g.image_id,
        matches=matches,
        scores=scores,
        n_detections=len(dets),
    )


def identify_context(
    q: Question, g: SceneGraph, mt: MatchTable, mode: str = "selected"
) -> ContextSet:
    """Classify each detection as relevant to the question or as context.

    mode="selected": relevant rows are exactly the detections matched to
    objects named by some reasoning step; unmatched detections are context.
    mode="strict" additionally keeps any matched object whose class or
    attribute appears verbatim in a step's arguments, guarding existence
    and verification questions against swaps that change the true answer.
    """
    if mode not in ("selected", "strict"):
        raise ValueError(f"unknown context mode {mode!r}")
    if mt.image_id != g.image_id or q.image_id != g.image_id:
        raise ImageMismatch(
            f"question {q.question_id} (image {q.image_id}) against match table "
            f"for image {mt.image_id} and graph {g.image_id}"
        )
    relevant_ids: set[str] = set()
    for step in q.program:
        relevant_ids.update(step.selected_object_ids)
    if mode == "strict":
        tokens: set[str] = set()
        for step in q.program:
            tokens.update(step.arguments)
        for obj in g.objects:
            if obj.object_id not in mt.matches:
                continue
            if obj.class_label in tokens or obj.attributes & tokens:
                relevant_ids.add(obj.object_id)
    relevant = {
        mt.matches[oid] for oid in relevant_ids if oid in mt.matches
    }
    context = set(range(mt.n_detections)) - relevant
    return ContextSet(
        question_id=q.question_id,
        relevant_indices=tuple(sorted(relevant)),
        context_indices=tuple(sorted(context)),
    )

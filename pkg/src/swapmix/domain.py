"""Core data types shared by every stage of the toolkit.

All types are immutable after construction and safe to share across
concurrent workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple

import numpy as np

from .errors import DimensionMismatch, UnknownLabel
from .seeding import rng_from

# The reasoning-step vocabulary the toolkit interprets. Steps outside this
# set still parse (real datasets contain rarer operations); the symbolic
# executor excludes such questions instead of failing the whole run.
OPERATIONS = frozenset(
    {"select", "filter", "relate", "query", "verify", "exist", "choose", "and", "or"}
)

# Operations whose step result is an answer string rather than a selection.
ANSWER_OPERATIONS = frozenset({"query", "verify", "exist", "choose"})


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in pixel coordinates, xyxy convention."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self) -> None:
        coords = (self.x1, self.y1, self.x2, self.y2)
        if not all(math.isfinite(c) for c in coords):
            raise ValueError(f"non-finite bounding box {coords}")
        if min(coords) < 0:
            raise ValueError(f"negative bounding box coordinate in {coords}")
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ValueError(f"degenerate bounding box {coords}")

    @property
    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection-over-union of two boxes; 0.0 when disjoint."""
    ix = min(a.x2, b.x2) - max(a.x1, b.x1)
    iy = min(a.y2, b.y2) - max(a.y1, b.y1)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


@dataclass(frozen=True)
class ObjectAnnotation:
    """A ground-truth object: one class, any number of attributes, one box."""

    object_id: str
    class_label: str
    attributes: frozenset[str]
    bbox: BoundingBox

    def __post_init__(self) -> None:
        # Duplicate attribute strings in input are deduplicated silently.
        object.__setattr__(self, "attributes", frozenset(self.attributes))


class Relation(NamedTuple):
    subject_id: str
    predicate: str
    object_id: str


@dataclass(frozen=True)
class SceneGraph:
    """Annotated objects and relations for one image."""

    image_id: str
    width: float
    height: float
    objects: tuple[ObjectAnnotation, ...]
    relations: tuple[Relation, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "objects", tuple(self.objects))
        object.__setattr__(self, "relations", tuple(Relation(*r) for r in self.relations))

    def object_map(self) -> dict[str, ObjectAnnotation]:
        return {o.object_id: o for o in self.objects}

    def replace_objects(self, replacements: Mapping[str, ObjectAnnotation]) -> SceneGraph:
        """Copy of the graph with some objects substituted (relations kept)."""
        objects = tuple(replacements.get(o.object_id, o) for o in self.objects)
        return SceneGraph(self.image_id, self.width, self.height, objects, self.relations)


def validate_scene_graph(g: SceneGraph) -> list[str]:
    """Check SceneGraph invariants; violations are data, not failures."""
    violations: list[str] = []
    seen: set[str] = set()
    for obj in g.objects:
        if not obj.object_id:
            violations.append("empty object_id")
        elif obj.object_id in seen:
            violations.append(f"duplicate object_id: {obj.object_id}")
        else:
            seen.add(obj.object_id)
        if not obj.class_label:
            violations.append(f"empty class_label: {obj.object_id}")
    for rel in g.relations:
        for endpoint in (rel.subject_id, rel.object_id):
            if endpoint not in seen:
                violations.append(f"dangling relation endpoint: {endpoint}")
    return violations


@dataclass(frozen=True)
class ReasoningStep:
    """One step of a question's ground-truth reasoning program."""

    step_index: int
    operation: str
    arguments: tuple[str, ...]
    dependencies: tuple[int, ...]
    selected_object_ids: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "arguments", tuple(self.arguments))
        object.__setattr__(self, "dependencies", tuple(self.dependencies))
        object.__setattr__(self, "selected_object_ids", tuple(self.selected_object_ids))


@dataclass(frozen=True)
class Question:
    """A question, its ground-truth answer, and its reasoning program."""

    question_id: str
    image_id: str
    text: str
    gt_answer: str
    program: tuple[ReasoningStep, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "program", tuple(self.program))

    def final_step(self) -> ReasoningStep:
        return self.program[-1]


@dataclass(frozen=True)
class DetectedObject:
    """One detector output row: its index into the feature matrix and its box."""

    detection_index: int
    bbox: BoundingBox
    predicted_class: str | None = None


class FeatureMatrix:
    """An n-by-d matrix of float32 object features, immutable once built."""

    __slots__ = ("rows",)

    def __init__(self, rows: np.ndarray | Iterable[Iterable[float]]):
        arr = np.asarray(rows, dtype=np.float32)
        if arr.ndim != 2:
            raise DimensionMismatch(f"feature matrix must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionMismatch(f"feature matrix must be at least 1x1, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("feature matrix contains non-finite entries")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        self.rows = arr

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def d(self) -> int:
        return self.rows.shape[1]

    def row(self, index: int) -> np.ndarray:
        return self.rows[index]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FeatureMatrix):
            return NotImplemented
        return self.rows.shape == other.rows.shape and bool(
            np.all(self.rows.view(np.uint32) == other.rows.view(np.uint32))
        )

    def __repr__(self) -> str:
        return f"FeatureMatrix(n={self.n}, d={self.d})"


@dataclass(frozen=True)
class ContextSet:
    """Per-question partition of detection rows into relevant and context."""

    question_id: str
    relevant_indices: tuple[int, ...]
    context_indices: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "relevant_indices", tuple(self.relevant_indices))
        object.__setattr__(self, "context_indices", tuple(self.context_indices))
        overlap = set(self.relevant_indices) & set(self.context_indices)
        if overlap:
            raise ValueError(f"indices both relevant and context: {sorted(overlap)}")

    @property
    def m(self) -> int:
        return len(self.context_indices)


@dataclass(frozen=True)
class EmbeddingTable:
    """A word-embedding table with deterministic out-of-vocabulary fallback.

    Multi-word tokens absent from the table resolve to the mean of their
    per-word vectors. Unknown words resolve to a hash-seeded unit vector
    when the fallback is enabled, so similarity queries never fail hard.
    """

    dimension: int
    entries: Mapping[str, np.ndarray] = field(repr=False)

    def __contains__(self, token: str) -> bool:
        return token in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def _fallback(self, token: str) -> np.ndarray:
        rng = rng_from("oov", self.dimension, token)
        vec = rng.standard_normal(self.dimension).astype(np.float32)
        return vec / np.linalg.norm(vec)

    def lookup(self, token: str, allow_fallback: bool = True) -> np.ndarray:
        """Vector for ``token``; see class docstring for resolution rules."""
        hit = self.entries.get(token)
        if hit is not None:
            return hit
        words = token.split()
        if len(words) > 1:
            parts = [self.lookup(w, allow_fallback=allow_fallback) for w in words]
            return np.mean(parts, axis=0, dtype=np.float32)
        if allow_fallback:
            return self._fallback(token)
        raise UnknownLabel(f"no embedding for token: {token!r}")

    def similarity(self, a: str, b: str, allow_fallback: bool = True) -> float:
        """Cosine similarity between token embeddings."""
        return cosine(
            self.lookup(a, allow_fallback=allow_fallback),
            self.lookup(b, allow_fallback=allow_fallback),
        )


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity of two non-zero vectors."""
    u64 = np.asarray(u, dtype=np.float64)
    v64 = np.asarray(v, dtype=np.float64)
    nu = np.linalg.norm(u64)
    nv = np.linalg.norm(v64)
    if nu == 0.0 or nv == 0.0:
        raise ValueError("cosine similarity of a zero-norm vector")
    return float(np.dot(u64, v64) / (nu * nv))

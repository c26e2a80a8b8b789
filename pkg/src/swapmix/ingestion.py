"""Parsers and writers for every on-disk format the toolkit consumes.

Inputs follow the GQA release shapes (scene graph JSON, question JSON with
semantic programs). Feature matrices travel in SMFX, a little-endian binary
format that round-trips bit-exactly:

    bytes 0-3   magic "SMFX"
    u32         version (= 1)
    u32         n   (object count)
    u32         d   (feature dimension)
    n * 4 f32   bounding boxes, rows of (x1, y1, x2, y2)
    n * d f32   feature rows
"""

from __future__ import annotations

import json
import re
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .domain import (
    ANSWER_OPERATIONS,
    BoundingBox,
    DetectedObject,
    EmbeddingTable,
    FeatureMatrix,
    ObjectAnnotation,
    Question,
    ReasoningStep,
    Relation,
    SceneGraph,
    validate_scene_graph,
)
from .errors import (
    BadMagic,
    DanglingDependency,
    DimensionMismatch,
    InvariantViolation,
    MalformedInput,
    TruncatedFile,
    VersionUnsupported,
)

SMFX_MAGIC = b"SMFX"
SMFX_VERSION = 1

# Object ids are appended as "class (id1,id2)"; the space before the paren
# distinguishes them from literal parentheses as in "not(red)".
_ARGUMENT_IDS = re.compile(r"^(?P<payload>|.*?\s)\((?P<ids>[^()]*)\)\s*$")


def _load_json_object(path: str | Path, what: str) -> dict:
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise MalformedInput(f"{what} file {path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise MalformedInput(f"{what} file {path} must be a JSON object keyed by id")
    return data


def _parse_object(image_id: str, object_id: str, raw: dict) -> tuple[ObjectAnnotation | None, list[str]]:
    violations: list[str] = []
    for key in ("name", "x", "y", "w", "h"):
        if key not in raw:
            raise MalformedInput(f"object {object_id} in image {image_id} missing field {key!r}")
    name = raw["name"]
    if not isinstance(name, str) or not name:
        violations.append(f"empty class_label: {object_id}")
    try:
        x, y, w, h = (float(raw[k]) for k in ("x", "y", "w", "h"))
        bbox = BoundingBox(x, y, x + w, y + h)
    except (TypeError, ValueError) as e:
        violations.append(f"invalid bbox for object {object_id}: {e}")
        return None, violations
    attributes = frozenset(str(a) for a in raw.get("attributes", []))
    if violations:
        return None, violations
    return ObjectAnnotation(object_id, name, attributes, bbox), violations


def parse_scene_graphs(path: str | Path) -> dict[str, SceneGraph]:
    """Parse a GQA-shaped scene graph file into validated graphs.

    Raises MalformedInput on schema problems and InvariantViolation (with
    per-object diagnostics) when any parsed graph fails validation.
    """
    data = _load_json_object(path, "scene graph")
    graphs: dict[str, SceneGraph] = {}
    all_violations: list[str] = []
    for image_id, raw in sorted(data.items()):
        if not isinstance(raw, dict) or "objects" not in raw:
            raise MalformedInput(f"image {image_id} missing 'objects'")
        objects: list[ObjectAnnotation] = []
        relations: list[Relation] = []
        violations: list[str] = []
        for object_id, raw_obj in sorted(raw["objects"].items()):
            ann, obj_violations = _parse_object(image_id, object_id, raw_obj)
            violations.extend(obj_violations)
            if ann is None:
                continue
            objects.append(ann)
            for rel in raw_obj.get("relations", []):
                if "name" not in rel or "object" not in rel:
                    raise MalformedInput(
                        f"relation on object {object_id} in image {image_id} missing name/object"
                    )
                relations.append(Relation(object_id, str(rel["name"]), str(rel["object"])))
        graph = SceneGraph(
            image_id=image_id,
            width=float(raw.get("width", 0) or 0),
            height=float(raw.get("height", 0) or 0),
            objects=tuple(objects),
            relations=tuple(relations),
        )
        violations.extend(validate_scene_graph(graph))
        if violations:
            all_violations.extend(f"image {image_id}: {v}" for v in violations)
        else:
            graphs[image_id] = graph
    if all_violations:
        raise InvariantViolation(
            f"{len(all_violations)} scene graph violation(s) in {path}", all_violations
        )
    return graphs


def _split_argument(argument: str) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Split a GQA argument string into tokens and embedded object ids.

    ``"statue,in front of,s (o7)"`` yields (("statue", "in front of", "s"),
    ("o7",)). Placeholder tokens ("?" and empty) are dropped.
    """
    ids: tuple[str, ...] = ()
    payload = argument
    match = _ARGUMENT_IDS.match(argument)
    if match:
        payload = match.group("payload")
        ids = tuple(t.strip() for t in match.group("ids").split(",") if t.strip())
    tokens = tuple(t.strip() for t in payload.split(",") if t.strip() and t.strip() != "?")
    return tokens, ids


def _parse_step(question_id: str, index: int, raw: dict, n_steps: int) -> ReasoningStep:
    if "operation" not in raw:
        raise MalformedInput(f"question {question_id} step {index} missing 'operation'")
    op_words = str(raw["operation"]).split()
    if not op_words:
        raise MalformedInput(f"question {question_id} step {index} has empty operation")
    operation, extra = op_words[0], tuple(op_words[1:])
    tokens, embedded_ids = _split_argument(str(raw.get("argument", "")))
    dependencies = []
    for dep in raw.get("dependencies", []):
        if not isinstance(dep, int) or dep < 0 or dep >= index:
            raise DanglingDependency(
                f"question {question_id} step {index} depends on step {dep!r}"
            )
        dependencies.append(dep)
    selected = tuple(str(s) for s in raw.get("selected", [])) + embedded_ids
    # preserve first-seen order while deduplicating
    seen: dict[str, None] = dict.fromkeys(selected)
    return ReasoningStep(
        step_index=index,
        operation=operation,
        arguments=extra + tokens,
        dependencies=tuple(dependencies),
        selected_object_ids=tuple(seen),
    )


def parse_questions(path: str | Path) -> list[Question]:
    """Parse a GQA-shaped question file into Questions with resolved programs."""
    data = _load_json_object(path, "question")
    questions: list[Question] = []
    for question_id, raw in sorted(data.items()):
        if not isinstance(raw, dict):
            raise MalformedInput(f"question {question_id} is not an object")
        for key in ("imageId", "question", "answer", "semantic"):
            if key not in raw:
                raise MalformedInput(f"question {question_id} missing field {key!r}")
        semantic = raw["semantic"]
        if not isinstance(semantic, list) or not semantic:
            raise MalformedInput(f"question {question_id} has an empty program")
        steps = [
            _parse_step(question_id, i, step, len(semantic)) for i, step in enumerate(semantic)
        ]
        if steps[-1].operation not in ANSWER_OPERATIONS:
            raise MalformedInput(
                f"question {question_id} final step {steps[-1].operation!r} is not "
                f"answer-producing"
            )
        questions.append(
            Question(
                question_id=question_id,
                image_id=str(raw["imageId"]),
                text=str(raw["question"]),
                gt_answer=str(raw["answer"]),
                program=tuple(steps),
            )
        )
    return questions


def load_embeddings(path: str | Path) -> EmbeddingTable:
    """Load a plain-text embedding table (``token v1 v2 ... ve`` per line)."""
    entries: dict[str, np.ndarray] = {}
    dimension: int | None = None
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            fields = line.split()
            if not fields:
                continue
            token, values = fields[0], fields[1:]
            if not values:
                raise MalformedInput(f"{path}:{line_no}: token {token!r} has no values")
            try:
                vec = np.array([float(v) for v in values], dtype=np.float32)
            except ValueError as e:
                raise MalformedInput(f"{path}:{line_no}: {e}") from e
            if dimension is None:
                dimension = len(values)
            elif len(values) != dimension:
                raise DimensionMismatch(
                    f"{path}:{line_no}: expected {dimension} values, got {len(values)}"
                )
            if not np.all(np.isfinite(vec)):
                raise MalformedInput(f"{path}:{line_no}: non-finite embedding for {token!r}")
            if not np.linalg.norm(vec):
                raise MalformedInput(f"{path}:{line_no}: zero-norm embedding for {token!r}")
            if token in entries:
                raise MalformedInput(f"{path}:{line_no}: duplicate token {token!r}")
            vec.setflags(write=False)
            entries[token] = vec
    if dimension is None:
        raise MalformedInput(f"embedding table {path} is empty")
    return EmbeddingTable(dimension=dimension, entries=entries)


def write_feature_file(
    path: str | Path, matrix: FeatureMatrix, bboxes: Iterable[BoundingBox]
) -> None:
    """Write an SMFX v1 file; the companion reader restores it bit-exactly."""
    boxes = list(bboxes)
    if len(boxes) != matrix.n:
        raise DimensionMismatch(f"{len(boxes)} boxes for {matrix.n} feature rows")
    box_arr = np.array([(b.x1, b.y1, b.x2, b.y2) for b in boxes], dtype="<f4")
    with open(path, "wb") as f:
        f.write(SMFX_MAGIC)
        f.write(struct.pack("<III", SMFX_VERSION, matrix.n, matrix.d))
        f.write(box_arr.tobytes())
        f.write(matrix.rows.astype("<f4", copy=False).tobytes())


def read_feature_file(path: str | Path) -> tuple[FeatureMatrix, list[DetectedObject]]:
    """Read an SMFX file into a feature matrix and its detections."""
    with open(path, "rb") as f:
        buf = f.read()
    if len(buf) < 4:
        raise TruncatedFile(f"{path}: {len(buf)} bytes, header incomplete")
    if buf[:4] != SMFX_MAGIC:
        raise BadMagic(f"{path}: bad magic {buf[:4]!r}")
    if len(buf) < 16:
        raise TruncatedFile(f"{path}: header incomplete ({len(buf)} bytes)")
    version, n, d = struct.unpack_from("<III", buf, 4)
    if version != SMFX_VERSION:
        raise VersionUnsupported(f"{path}: unsupported SMFX version {version}")
    expected = 16 + n * 4 * 4 + n * d * 4
    if len(buf) < expected:
        raise TruncatedFile(f"{path}: expected {expected} bytes, got {len(buf)}")
    if len(buf) > expected:
        raise MalformedInput(f"{path}: {len(buf) - expected} trailing bytes")
    boxes = np.frombuffer(buf, dtype="<f4", count=n * 4, offset=16).reshape(n, 4)
    feats = np.frombuffer(buf, dtype="<f4", count=n * d, offset=16 + n * 16).reshape(n, d)
    detections = [
        DetectedObject(i, BoundingBox(*(float(v) for v in boxes[i]))) for i in range(n)
    ]
    return FeatureMatrix(feats), detections


@dataclass(frozen=True)
class DatasetBundle:
    """Everything loaded for one dataset split, frozen after indexing."""

    scene_graphs: Mapping[str, SceneGraph]
    questions: tuple[Question, ...]
    features: Mapping[str, tuple[FeatureMatrix, tuple[DetectedObject, ...]]]
    class_index: Mapping[str, tuple[tuple[str, str], ...]] = field(default_factory=dict)
    attribute_index: Mapping[str, tuple[frozenset[str], ...]] = field(default_factory=dict)

    @property
    def all_classes(self) -> frozenset[str]:
        return frozenset(self.class_index)

    @property
    def attribute_vocabulary(self) -> tuple[str, ...]:
        seen: set[str] = set()
        for sets in self.attribute_index.values():
            for attrs in sets:
                seen.update(attrs)
        return tuple(sorted(seen))

    def annotation(self, image_id: str, object_id: str) -> ObjectAnnotation:
        return self.scene_graphs[image_id].object_map()[object_id]


def build_indices(bundle: DatasetBundle) -> DatasetBundle:
    """Populate the class and attribute indices with canonical orderings."""
    by_class: dict[str, list[tuple[str, str]]] = {}
    attr_sets: dict[str, set[frozenset[str]]] = {}
    for image_id in sorted(bundle.scene_graphs):
        for obj in bundle.scene_graphs[image_id].objects:
            by_class.setdefault(obj.class_label, []).append((image_id, obj.object_id))
            attr_sets.setdefault(obj.class_label, set()).add(obj.attributes)
    class_index = {c: tuple(sorted(members)) for c, members in by_class.items()}
    attribute_index = {
        c: tuple(sorted(sets, key=lambda s: tuple(sorted(s)))) for c, sets in attr_sets.items()
    }
    return replace(bundle, class_index=class_index, attribute_index=attribute_index)


def load_features_dir(
    features_dir: str | Path,
) -> dict[str, tuple[FeatureMatrix, tuple[DetectedObject, ...]]]:
    """Load every ``{image_id}.smfx`` file under a directory."""
    features = {}
    for path in sorted(Path(features_dir).glob("*.smfx")):
        matrix, dets = read_feature_file(path)
        features[path.stem] = (matrix, tuple(dets))
    return features


def load_bundle(
    scene_graphs_path: str | Path,
    questions_path: str | Path,
    features_dir: str | Path | None = None,
) -> DatasetBundle:
    """Load and cross-validate a dataset split, returning an indexed bundle."""
    graphs = parse_scene_graphs(scene_graphs_path)
    questions = parse_questions(questions_path)
    violations: list[str] = []
    for q in questions:
        graph = graphs.get(q.image_id)
        if graph is None:
            violations.append(f"question {q.question_id}: unknown image {q.image_id}")
            continue
        known = {o.object_id for o in graph.objects}
        for step in q.program:
            for oid in step.selected_object_ids:
                if oid not in known:
                    violations.append(
                        f"question {q.question_id} step {step.step_index}: "
                        f"selected unknown object {oid}"
                    )
    if violations:
        raise InvariantViolation(f"{len(violations)} bundle violation(s)", violations)
    features = load_features_dir(features_dir) if features_dir is not None else {}
    bundle = DatasetBundle(
        scene_graphs=graphs, questions=tuple(questions), features=features
    )
    return build_indices(bundle)

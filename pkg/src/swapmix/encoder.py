"""Annotation-space object encodings for perfect-sight evaluation.

Each object encodes as the average of three parts: a projected class
embedding, a projected mean attribute embedding, and a projected
normalized bounding box. The projections are fixed seeded random matrices
(unit-variance entries scaled by 1/sqrt(input_dim)), so encodings are
deterministic and need no training.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .domain import (
    DetectedObject,
    EmbeddingTable,
    FeatureMatrix,
    ObjectAnnotation,
    SceneGraph,
)
from .errors import EmptyClass
from .ingestion import DatasetBundle
from .seeding import rng_from, stable_seed


def _projection(seed: int, d: int, input_dim: int) -> np.ndarray:
    rng = rng_from("projection", seed)
    matrix = rng.standard_normal((d, input_dim)) / np.sqrt(input_dim)
    matrix.setflags(write=False)
    return matrix


@dataclass(frozen=True)
class EncoderConfig:
    """Projection matrices and the embedding table behind them."""

    d: int
    e: int
    class_seed: int
    attribute_seed: int
    bbox_seed: int
    table: EmbeddingTable
    p_class: np.ndarray = field(repr=False, compare=False)
    p_attribute: np.ndarray = field(repr=False, compare=False)
    p_bbox: np.ndarray = field(repr=False, compare=False)

    @classmethod
    def create(cls, d: int, table: EmbeddingTable, seed: int = 0) -> "EncoderConfig":
        if d < 1:
            raise ValueError(f"encoding dimension must be >= 1, got {d}")
        class_seed = stable_seed(seed, "encoder", "class")
        attribute_seed = stable_seed(seed, "encoder", "attribute")
        bbox_seed = stable_seed(seed, "encoder", "bbox")
        return cls(
            d=d,
            e=table.dimension,
            class_seed=class_seed,
            attribute_seed=attribute_seed,
            bbox_seed=bbox_seed,
            table=table,
            p_class=_projection(class_seed, d, table.dimension),
            p_attribute=_projection(attribute_seed, d, table.dimension),
            p_bbox=_projection(bbox_seed, d, 4),
        )


def encode_object(
    ann: ObjectAnnotation,
    img_size: tuple[float, float],
    cfg: EncoderConfig,
    allow_fallback: bool = True,
) -> np.ndarray:
    """Encode one annotated object as (o_i + a_i + b_i) / 3.

    o_i projects the class embedding, a_i the mean of the attribute
    embeddings (zero when the object has none), b_i the bbox normalized by
    image size.
    """
    width, height = img_size
    if width <= 0 or height <= 0:
        raise ValueError(f"image size must be positive, got {img_size}")
    o_i = cfg.p_class @ cfg.table.lookup(ann.class_label, allow_fallback=allow_fallback)
    if ann.attributes:
        vectors = [
            cfg.table.lookup(a, allow_fallback=allow_fallback)
            for a in sorted(ann.attributes)
        ]
        a_i = cfg.p_attribute @ np.mean(vectors, axis=0)
    else:
        a_i = np.zeros(cfg.d)
    box = np.array(
        [ann.bbox.x1 / width, ann.bbox.y1 / height, ann.bbox.x2 / width, ann.bbox.y2 / height]
    )
    b_i = cfg.p_bbox @ box
    return ((o_i + a_i + b_i) / 3.0).astype(np.float32)


def swap_class_encoding(
    ann: ObjectAnnotation,
    donor_class: str,
    bundle: DatasetBundle,
    rng_seed: int,
    cfg: EncoderConfig,
    img_size: tuple[float, float],
) -> np.ndarray:
    """Encode the source object as if its class were swapped.

    Attributes come from a seeded-random real instance of the donor class;
    the original bounding box is kept, so the b_i term is unchanged.
    """
    instances = bundle.class_index.get(donor_class, ())
    if not instances:
        raise EmptyClass(f"no instances of class {donor_class!r}")
    rng = rng_from("class-swap-donor", rng_seed, donor_class)
    donor_image, donor_object = instances[int(rng.integers(len(instances)))]
    donor = bundle.annotation(donor_image, donor_object)
    swapped = ObjectAnnotation(
        object_id=ann.object_id,
        class_label=donor_class,
        attributes=donor.attributes,
        bbox=ann.bbox,
    )
    return encode_object(swapped, img_size, cfg)


def swap_attribute_encoding(
    ann: ObjectAnnotation,
    new_attribute: str,
    cfg: EncoderConfig,
    img_size: tuple[float, float],
) -> np.ndarray:
    """Encode the source object with its canonical attribute replaced.

    The canonical attribute is the lexicographically smallest; class and
    bbox terms are untouched.
    """
    if not ann.attributes:
        raise ValueError(f"object {ann.object_id} has no attribute to swap")
    canonical = min(ann.attributes)
    if new_attribute == canonical:
        raise ValueError(f"attribute swap must change the attribute ({new_attribute!r})")
    swapped = ObjectAnnotation(
        object_id=ann.object_id,
        class_label=ann.class_label,
        attributes=(ann.attributes - {canonical}) | {new_attribute},
        bbox=ann.bbox,
    )
    return encode_object(swapped, img_size, cfg)


def scene_image_size(g: SceneGraph) -> tuple[float, float]:
    """Image size for bbox normalization, derived from extents if absent."""
    if g.width > 0 and g.height > 0:
        return g.width, g.height
    width = max((o.bbox.x2 for o in g.objects), default=1.0)
    height = max((o.bbox.y2 for o in g.objects), default=1.0)
    return max(width, 1.0), max(height, 1.0)


def encode_scene(
    g: SceneGraph, cfg: EncoderConfig
) -> tuple[FeatureMatrix, list[DetectedObject]]:
    """Encode every object of a scene, ordered by object_id.

    The returned detections reuse the ground-truth boxes, so IoU matching
    against the graph is exact.
    """
    if not g.objects:
        raise ValueError(f"scene {g.image_id} has no objects to encode")
    img_size = scene_image_size(g)
    ordered = sorted(g.objects, key=lambda o: o.object_id)
    rows = np.stack([encode_object(o, img_size, cfg) for o in ordered])
    detections = [
        DetectedObject(i, o.bbox, predicted_class=o.class_label)
        for i, o in enumerate(ordered)
    ]
    return FeatureMatrix(rows), detections

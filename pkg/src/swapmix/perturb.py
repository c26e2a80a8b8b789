"""Apply planned swaps to feature matrices, one context object at a time.

The swap itself follows the masked-matrix form: with P all-ones except a
zeroed row j and S broadcasting the donor feature, the perturbed matrix is
C ⊙ P + S ⊙ P^c, which equals direct replacement of row j.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, Mapping

import numpy as np

from .context import MatchTable
from .domain import FeatureMatrix, ObjectAnnotation, SceneGraph
from .encoder import EncoderConfig, encode_object, scene_image_size
from .errors import DimensionMismatch, IndexOutOfRange
from .ingestion import DatasetBundle
from .swapplan import SwapCandidate, SwapPlan

# A resolver turns a candidate into its donor feature row, or names the
# reason the candidate cannot be realized (donor unmatched, no features).
Resolver = Callable[[SwapCandidate], "tuple[np.ndarray | None, str | None]"]


@dataclass(frozen=True, eq=False)
class PerturbationRecord:
    """One realized (or skipped) perturbation of a question's features."""

    question_id: str
    pert_id: int
    detection_index: int
    kind: str
    donor_image: str | None
    donor_object: str | None
    donor_feature: np.ndarray | None
    skip_reason: str | None = None


def apply_swap(V: FeatureMatrix, j: int, c_p: np.ndarray) -> FeatureMatrix:
    """Replace row j of V with c_p via the masked-matrix formulation."""
    if not 0 <= j < V.n:
        raise IndexOutOfRange(f"row {j} outside [0, {V.n})")
    donor = np.asarray(c_p, dtype=np.float32).reshape(-1)
    if donor.shape[0] != V.d:
        raise DimensionMismatch(f"donor has dimension {donor.shape[0]}, matrix has {V.d}")
    P = np.ones((V.n, V.d), dtype=np.float32)
    P[j, :] = 0.0
    S = np.broadcast_to(donor, (V.n, V.d))
    return FeatureMatrix(V.rows * P + S * (1.0 - P))


def enumerate_perturbations(
    V: FeatureMatrix, plan: SwapPlan, resolve: Resolver
) -> Iterator[tuple[PerturbationRecord, FeatureMatrix | None]]:
    """Realize every candidate of a plan against V, in pert_id order.

    Unresolvable candidates yield a record with skip_reason set and no
    matrix; pert_ids still advance so the numbering matches the plan file.
    """
    for pert_id, cand in plan.candidates():
        feature, skip_reason = resolve(cand)
        record = PerturbationRecord(
            question_id=plan.question_id,
            pert_id=pert_id,
            detection_index=cand.source_detection_index,
            kind=cand.kind,
            donor_image=cand.donor_image,
            donor_object=cand.donor_object,
            donor_feature=feature,
            skip_reason=skip_reason,
        )
        if skip_reason is not None:
            yield record, None
        else:
            yield record, apply_swap(V, cand.source_detection_index, feature)


def make_frcnn_resolver(
    bundle: DatasetBundle, match_tables: Mapping[str, MatchTable]
) -> Resolver:
    """Fetch donor features from the donor image's matched detection row."""

    def resolve(cand: SwapCandidate) -> tuple[np.ndarray | None, str | None]:
        if cand.donor_image is None or cand.donor_object is None:
            return None, "candidate has no donor object"
        loaded = bundle.features.get(cand.donor_image)
        if loaded is None:
            return None, f"no features for donor image {cand.donor_image}"
        mt = match_tables.get(cand.donor_image)
        detection = mt.detection_for(cand.donor_object) if mt is not None else None
        if detection is None:
            return None, f"donor {cand.donor_image}/{cand.donor_object} unmatched"
        return loaded[0].row(detection), None

    return resolve


def make_perfect_resolver(graph: SceneGraph, cfg: EncoderConfig) -> Resolver:
    """Synthesize donor features by encoding the swapped annotation.

    The donor class and attributes come from the candidate; the bounding
    box stays the source object's, so only class/attribute terms move.
    """
    ordered = sorted(graph.objects, key=lambda o: o.object_id)
    img_size = scene_image_size(graph)

    def resolve(cand: SwapCandidate) -> tuple[np.ndarray | None, str | None]:
        if not 0 <= cand.source_detection_index < len(ordered):
            return None, f"detection {cand.source_detection_index} outside scene"
        source = ordered[cand.source_detection_index]
        swapped = ObjectAnnotation(
            object_id=source.object_id,
            class_label=cand.donor_class,
            attributes=cand.donor_attributes,
            bbox=source.bbox,
        )
        return encode_object(swapped, img_size, cfg), None

    return resolve

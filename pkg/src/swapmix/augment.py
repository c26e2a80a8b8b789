"""Training-time SwapMix: stochastically swap context features per epoch.

Unlike diagnosis, augmentation may swap several context objects of one
question at once. Every draw is derived from (seed, epoch, question,
object), so shuffled or parallel data loading cannot change the stream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .context import MatchTable
from .domain import ContextSet, EmbeddingTable, FeatureMatrix
from .ingestion import DatasetBundle
from .perturb import Resolver
from .seeding import rng_from
from .swapplan import (
    KIND_ATTRIBUTE,
    KIND_CLASS,
    SwapCandidate,
    attribute_candidates,
    attribute_candidates_perfect,
    class_candidates,
)


@dataclass(frozen=True)
class AugmentConfig:
    p_swap: float = 0.5
    p_class: float = 0.5
    k: int = 10
    sim_threshold: float = 0.5
    seed: int = 0
    epoch: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.p_swap <= 1:
            raise ValueError(f"p_swap must be in [0, 1], got {self.p_swap}")
        if not 0 <= self.p_class <= 1:
            raise ValueError(f"p_class must be in [0, 1], got {self.p_class}")


def _decision(
    cfg: AugmentConfig, question_id: str, object_id: str
) -> tuple[bool, str | None, np.random.Generator]:
    rng = rng_from(cfg.seed, "augment", cfg.epoch, question_id, object_id)
    if rng.random() >= cfg.p_swap:
        return False, None, rng
    kind = KIND_CLASS if rng.random() < cfg.p_class else KIND_ATTRIBUTE
    return True, kind, rng


def decide_swap(cfg: AugmentConfig, question_id: str, object_id: str) -> tuple[bool, str | None]:
    """The per-object swap decision (exposed for statistical checks)."""
    swap, kind, _ = _decision(cfg, question_id, object_id)
    return swap, kind


def _draw_candidate(
    kind: str,
    source,
    detection_index: int,
    image_id: str,
    bundle: DatasetBundle,
    table: EmbeddingTable,
    cfg: AugmentConfig,
    rng: np.random.Generator,
    mode: str,
) -> SwapCandidate | None:
    if kind == KIND_CLASS:
        pool = class_candidates(
            source.class_label, table, bundle.all_classes, cfg.k, cfg.sim_threshold, rng=rng
        )
        if not pool:
            return None
        donor_class, padded = pool[int(rng.integers(len(pool)))]
        instances = bundle.class_index.get(donor_class, ())
        if not instances:
            return None
        donor_image, donor_object = instances[int(rng.integers(len(instances)))]
        return SwapCandidate(
            kind=KIND_CLASS,
            source_detection_index=detection_index,
            donor_image=donor_image,
            donor_object=donor_object,
            donor_class=donor_class,
            donor_attributes=bundle.annotation(donor_image, donor_object).attributes,
            padded=padded,
        )
    if mode == "perfect":
        if not source.attributes:
            return None
        options = attribute_candidates_perfect(
            source, table, bundle.attribute_vocabulary, cfg.k
        )
        if not options:
            return None
        new_attribute = options[int(rng.integers(len(options)))]
        return SwapCandidate(
            kind=KIND_ATTRIBUTE,
            source_detection_index=detection_index,
            donor_image=None,
            donor_object=None,
            donor_class=source.class_label,
            donor_attributes=(source.attributes - {min(source.attributes)}) | {new_attribute},
        )
    donors = attribute_candidates(source, bundle, cfg.k, rng=rng, source_image=image_id)
    if not donors:
        return None
    donor_image, donor_object = donors[int(rng.integers(len(donors)))]
    donor = bundle.annotation(donor_image, donor_object)
    return SwapCandidate(
        kind=KIND_ATTRIBUTE,
        source_detection_index=detection_index,
        donor_image=donor_image,
        donor_object=donor_object,
        donor_class=donor.class_label,
        donor_attributes=donor.attributes,
    )


def augment_features(
    V: FeatureMatrix,
    ctx: ContextSet,
    mt: MatchTable,
    bundle: DatasetBundle,
    table: EmbeddingTable,
    cfg: AugmentConfig,
    resolve: Resolver,
    mode: str = "frcnn",
) -> tuple[FeatureMatrix, list[dict]]:
    """One augmented version of V for this epoch, plus the applied swaps.

    Relevant rows are never touched; context objects whose donor cannot be
    resolved (or that have no candidates) are left unswapped.
    """
    graph = bundle.scene_graphs[mt.image_id]
    object_map = graph.object_map()
    rows = V.rows.copy()
    applied: list[dict] = []
    for j in ctx.context_indices:
        object_id = mt.object_for(j)
        if object_id is None:
            continue
        swap, kind, rng = _decision(cfg, ctx.question_id, object_id)
        if not swap:
            continue
        cand = _draw_candidate(
            kind, object_map[object_id], j, mt.image_id, bundle, table, cfg, rng, mode
        )
        if cand is None:
            continue
        feature, skip_reason = resolve(cand)
        if skip_reason is not None:
            continue
        rows[j] = np.asarray(feature, dtype=np.float32)
        applied.append(
            {
                "question_id": ctx.question_id,
                "epoch": cfg.epoch,
                "detection_index": j,
                "kind": cand.kind,
                "donor_image": cand.donor_image,
                "donor_object": cand.donor_object,
                "donor_class": cand.donor_class,
                "donor_attributes": sorted(cand.donor_attributes),
                "padded": cand.padded,
            }
        )
    return FeatureMatrix(rows), applied

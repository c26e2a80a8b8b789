import json

import numpy as np
import pytest

from swapmix.augment import AugmentConfig, augment_features, decide_swap
from swapmix.context import identify_context, match_detections
from swapmix.domain import EmbeddingTable
from swapmix.encoder import EncoderConfig, encode_scene
from swapmix.ingestion import load_bundle
from swapmix.perturb import make_perfect_resolver


class TestConfig:
    def test_probability_bounds(self):
        with pytest.raises(ValueError):
            AugmentConfig(p_swap=1.2)
        with pytest.raises(ValueError):
            AugmentConfig(p_class=-0.1)


class TestDecisions:
    def test_deterministic_per_key(self):
        cfg = AugmentConfig(seed=1, epoch=3)
        assert decide_swap(cfg, "q1", "o1") == decide_swap(cfg, "q1", "o1")

    def test_epoch_changes_stream(self):
        a = AugmentConfig(seed=1, epoch=0)
        b = AugmentConfig(seed=1, epoch=1)
        decisions_a = [decide_swap(a, f"q{i}", "o1") for i in range(200)]
        decisions_b = [decide_swap(b, f"q{i}", "o1") for i in range(200)]
        assert decisions_a != decisions_b

    def test_rates_near_nominal(self):
        cfg = AugmentConfig(p_swap=0.5, p_class=0.5, seed=9)
        n = 10_000
        swaps = kinds = 0
        for i in range(n):
            swap, kind = decide_swap(cfg, f"q{i}", "o0")
            if swap:
                swaps += 1
                if kind == "class":
                    kinds += 1
        assert abs(swaps / n - 0.5) < 0.02
        assert abs(kinds / swaps - 0.5) < 0.03

    def test_p_swap_one_always_swaps(self):
        cfg = AugmentConfig(p_swap=1.0, p_class=1.0)
        for i in range(50):
            swap, kind = decide_swap(cfg, f"q{i}", "o0")
            assert swap and kind == "class"


def build_setup(tmp_path):
    graphs = {
        "imgA": {
            "width": 100, "height": 100,
            "objects": {
                "a1": {"name": "car", "x": 0, "y": 0, "w": 10, "h": 10,
                        "attributes": ["red"]},
                "a2": {"name": "truck", "x": 20, "y": 0, "w": 10, "h": 10,
                        "attributes": ["blue"]},
                "a3": {"name": "tree", "x": 40, "y": 0, "w": 10, "h": 10,
                        "attributes": ["green"]},
            },
        }
    }
    questions = {
        "q1": {
            "imageId": "imgA",
            "question": "what color is the tree",
            "answer": "green",
            "semantic": [
                {"operation": "select", "argument": "tree (a3)", "dependencies": []},
                {"operation": "query", "argument": "color", "dependencies": [0]},
            ],
        }
    }
    gp, qp = tmp_path / "g.json", tmp_path / "q.json"
    gp.write_text(json.dumps(graphs))
    qp.write_text(json.dumps(questions))
    bundle = load_bundle(gp, qp)
    vectors = {
        "car": [1.0, 0.0, 0.0],
        "truck": [0.9, 0.1, 0.0],
        "tree": [0.0, 1.0, 0.0],
        "red": [0.0, 0.0, 1.0],
        "blue": [0.1, 0.0, 0.9],
        "green": [0.2, 0.0, 0.8],
    }
    table = EmbeddingTable(
        3, {k: np.asarray(v, dtype=np.float32) for k, v in vectors.items()}
    )
    enc = EncoderConfig.create(8, table, seed=2)
    g = bundle.scene_graphs["imgA"]
    V, dets = encode_scene(g, enc)
    mt = match_detections(g, list(dets))
    ctx = identify_context(bundle.questions[0], g, mt)
    resolve = make_perfect_resolver(g, enc)
    return bundle, table, g, V, mt, ctx, resolve


class TestAugmentFeatures:
    def test_p_swap_zero_is_bitwise_identity(self, tmp_path):
        bundle, table, g, V, mt, ctx, resolve = build_setup(tmp_path)
        cfg = AugmentConfig(p_swap=0.0, seed=5)
        out, applied = augment_features(V, ctx, mt, bundle, table, cfg, resolve, mode="perfect")
        assert out == V
        assert applied == []

    def test_deterministic_per_seed_epoch(self, tmp_path):
        bundle, table, g, V, mt, ctx, resolve = build_setup(tmp_path)
        cfg = AugmentConfig(p_swap=1.0, seed=5, epoch=2)
        out1, applied1 = augment_features(V, ctx, mt, bundle, table, cfg, resolve, mode="perfect")
        out2, applied2 = augment_features(V, ctx, mt, bundle, table, cfg, resolve, mode="perfect")
        assert out1 == out2
        assert applied1 == applied2

    def test_swaps_only_context_rows(self, tmp_path):
        bundle, table, g, V, mt, ctx, resolve = build_setup(tmp_path)
        cfg = AugmentConfig(p_swap=1.0, seed=5)
        out, applied = augment_features(V, ctx, mt, bundle, table, cfg, resolve, mode="perfect")
        touched = {rec["detection_index"] for rec in applied}
        assert touched <= set(ctx.context_indices)
        for j in ctx.relevant_indices:
            assert np.array_equal(
                out.rows[j].view(np.uint32), V.rows[j].view(np.uint32)
            )

    def test_multiple_simultaneous_swaps_possible(self, tmp_path):
        bundle, table, g, V, mt, ctx, resolve = build_setup(tmp_path)
        cfg = AugmentConfig(p_swap=1.0, seed=5)
        out, applied = augment_features(V, ctx, mt, bundle, table, cfg, resolve, mode="perfect")
        # both context objects forced to swap in the same epoch
        assert len(applied) == len(ctx.context_indices) == 2

    def test_manifest_records_donors(self, tmp_path):
        bundle, table, g, V, mt, ctx, resolve = build_setup(tmp_path)
        cfg = AugmentConfig(p_swap=1.0, p_class=1.0, seed=5, epoch=7)
        _, applied = augment_features(V, ctx, mt, bundle, table, cfg, resolve, mode="perfect")
        for rec in applied:
            assert rec["question_id"] == "q1"
            assert rec["epoch"] == 7
            assert rec["kind"] == "class"
            assert rec["donor_class"]
            assert isinstance(rec["donor_attributes"], list)

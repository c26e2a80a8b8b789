"""Deterministic synthetic datasets for tests and demos.

Two generators:

* build_symbolic_fixture: GQA-shaped images and questions covering every
  executor operation. Class embeddings are grouped into families that are
  mutually similar (cosine > 0.95) but dissimilar across families
  (< 0.09), so with the default 0.5 threshold swap pools stay inside a
  family and never collide with the classes a question mentions. Combined
  with single-class-per-family images and existence questions about
  entirely absent families, no SwapMix candidate can change the true
  answer: the symbolic model must report zero context reliance.

* build_adversarial_fixture: hand-placed feature rows where class swaps
  provably drag the mean feature across the baseline model's decision
  boundary for exactly half of the correctly answered questions.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .domain import BoundingBox, FeatureMatrix
from .encoder import EncoderConfig, encode_scene
from .ingestion import load_bundle, load_embeddings, write_feature_file

FAMILIES: dict[str, list[str]] = {
    "vehicle": [
        "car", "truck", "bus", "taxi", "van", "motorcycle",
        "bicycle", "scooter", "tractor", "trailer", "jeep", "ambulance",
    ],
    "plant": [
        "tree", "bush", "flower", "grass", "vine", "fern",
        "shrub", "palm", "cactus", "moss", "reed", "bamboo",
    ],
    "animal": [
        "dog", "cat", "horse", "cow", "sheep", "goat",
        "bird", "duck", "rabbit", "deer", "pig", "chicken",
    ],
    "artifact": [
        "chair", "table", "lamp", "bench", "shelf", "cabinet",
        "stool", "desk", "couch", "mirror", "clock", "vase",
    ],
}

COLORS = [
    "red", "blue", "green", "yellow", "orange", "purple",
    "black", "white", "brown", "gray", "silver", "tan",
]
SIZES = ["small", "large", "tiny", "huge"]
MATERIALS = ["wooden", "metal", "plastic", "glass", "rubber", "steel"]
PREDICATES = ["left of", "right of", "near", "behind", "in front of"]

EMBED_DIM = 8
_SHARED_AXIS = EMBED_DIM - 1


def _family_vector(axis: int, member_index: int) -> np.ndarray:
    """Unit vector mostly along the family axis, tilted toward a shared one.

    Members of one family pairwise exceed cos(16.5 deg) ~ 0.96 similarity;
    members of different families stay below sin(16.5 deg)^2 ~ 0.081.
    """
    theta = np.deg2rad(1.5 * member_index)
    vec = np.zeros(EMBED_DIM)
    vec[axis] = np.cos(theta)
    vec[_SHARED_AXIS] = np.sin(theta)
    return vec


def _write_embeddings(path: Path, groups: dict[int, list[str]]) -> None:
    lines = []
    for axis in sorted(groups):
        for i, token in enumerate(groups[axis]):
            vec = _family_vector(axis, i)
            lines.append(token + " " + " ".join(f"{v:.8f}" for v in vec))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _grid_box(slot: int) -> dict:
    col, row = slot % 4, slot // 4
    return {"x": col * 160 + 10, "y": row * 160 + 10, "w": 140, "h": 140}


def write_symbolic_embeddings(path: str | Path) -> Path:
    """Embedding table covering all fixture classes and attributes."""
    path = Path(path)
    groups = {i: members for i, (_, members) in enumerate(sorted(FAMILIES.items()))}
    groups[4] = COLORS
    groups[5] = SIZES
    groups[6] = MATERIALS
    _write_embeddings(path, groups)
    return path


def build_symbolic_fixture(
    root: str | Path, n_images: int = 24, encode_dim: int = 16
) -> dict[str, Path]:
    """Write the operation-coverage dataset under root; returns its paths.

    Every image holds one "hero" object (all three attribute categories),
    two or three objects of a second family's single class, and two of a
    third family's single class. The fourth family is entirely absent and
    feeds the negative existence question. Ground-truth answers are
    derived from the construction variables, not from the executor.
    """
    root = Path(root)
    features_dir = root / "features"
    features_dir.mkdir(parents=True, exist_ok=True)
    family_names = sorted(FAMILIES)
    class_cursor = {name: 0 for name in family_names}

    def next_class(family: str) -> str:
        members = FAMILIES[family]
        label = members[class_cursor[family] % len(members)]
        class_cursor[family] += 1
        return label

    graphs: dict[str, dict] = {}
    questions: dict[str, dict] = {}
    q_next = 0

    def add_question(image_id: str, answer: str, steps: list[dict]) -> None:
        nonlocal q_next
        questions[f"q{q_next:04d}"] = {
            "imageId": image_id,
            "question": next((s["text"] for s in steps if "text" in s), ""),
            "answer": answer,
            "semantic": [
                {k: v for k, v in s.items() if k != "text"} for s in steps
            ],
        }
        q_next += 1

    for i in range(n_images):
        image_id = f"i{i:03d}"
        fam_a = family_names[i % 4]
        fam_b = family_names[(i + 1) % 4]
        fam_c = family_names[(i + 2) % 4]
        fam_absent = family_names[(i + 3) % 4]
        cls_a, cls_b, cls_c = next_class(fam_a), next_class(fam_b), next_class(fam_c)
        absent_cls = FAMILIES[fam_absent][i % 12]

        hero_color = COLORS[i % 12]
        hero_size = SIZES[i % 4]
        hero_material = MATERIALS[i % 6]
        wrong_color = COLORS[(i + 1) % 12]
        alt_color = COLORS[(i + 2) % 12]

        objects: dict[str, dict] = {}
        slot = 0

        def add_object(class_label: str, attributes: list[str]) -> str:
            nonlocal slot
            object_id = f"o{len(objects)}"
            objects[object_id] = {
                "name": class_label,
                "attributes": attributes,
                "relations": [],
                **_grid_box(slot),
            }
            slot += 1
            return object_id

        hero = add_object(cls_a, [hero_color, hero_size, hero_material])
        n_b = 2 + (i % 2)
        group_b = [
            add_object(cls_b, [COLORS[(i + 3 + t) % 12], SIZES[1] if t else SIZES[0]])
            for t in range(n_b)
        ]
        group_c = [add_object(cls_c, [COLORS[(i + 6 + t) % 12]]) for t in range(2)]

        pred_1 = PREDICATES[i % 5]
        pred_2 = PREDICATES[(i + 2) % 5]
        objects[hero]["relations"].append({"name": pred_1, "object": group_c[0]})
        objects[group_b[0]]["relations"].append({"name": pred_2, "object": hero})

        graphs[image_id] = {"width": 640, "height": 480, "objects": objects}

        ids_b = ",".join(group_b)
        ids_c = ",".join(group_c)
        small_b_color = COLORS[(i + 3) % 12]

        add_question(image_id, hero_color, [
            {"operation": "select", "argument": f"{cls_a} ({hero})", "dependencies": [],
             "text": f"What color is the {cls_a}?"},
            {"operation": "query", "argument": "color", "dependencies": [0]},
        ])
        add_question(image_id, small_b_color, [
            {"operation": "select", "argument": f"{cls_b} ({ids_b})", "dependencies": [],
             "text": f"What color is the {SIZES[0]} {cls_b}?"},
            {"operation": "filter size", "argument": SIZES[0], "dependencies": [0]},
            {"operation": "query", "argument": "color", "dependencies": [1]},
        ])
        add_question(image_id, cls_a, [
            {"operation": "select", "argument": f"{cls_c} ({ids_c})", "dependencies": [],
             "text": f"What is the thing {pred_1} the {cls_c}?"},
            {"operation": "relate", "argument": f"{cls_a},{pred_1},s ({hero})",
             "dependencies": [0]},
            {"operation": "query", "argument": "name", "dependencies": [1]},
        ])
        add_question(image_id, hero_material, [
            {"operation": "select", "argument": f"{cls_b} ({ids_b})", "dependencies": [],
             "text": f"What material is the {cls_a} that the {cls_b} is {pred_2}?"},
            {"operation": "relate", "argument": f"{cls_a},{pred_2},o ({hero})",
             "dependencies": [0]},
            {"operation": "query", "argument": "material", "dependencies": [1]},
        ])
        add_question(image_id, "yes", [
            {"operation": "select", "argument": f"{cls_b} ({ids_b})", "dependencies": [],
             "text": f"Is there a {cls_b}?"},
            {"operation": "exist", "argument": "?", "dependencies": [0]},
        ])
        add_question(image_id, "no", [
            {"operation": "select", "argument": absent_cls, "dependencies": [],
             "text": f"Is there a {absent_cls}?"},
            {"operation": "exist", "argument": "?", "dependencies": [0]},
        ])
        verify_color = hero_color if i % 2 == 0 else wrong_color
        add_question(image_id, "yes" if i % 2 == 0 else "no", [
            {"operation": "select", "argument": f"{cls_a} ({hero})", "dependencies": [],
             "text": f"Is the {cls_a} {verify_color}?"},
            {"operation": "verify color", "argument": verify_color, "dependencies": [0]},
        ])
        options = f"{hero_color}|{alt_color}" if i % 2 == 0 else f"{alt_color}|{hero_color}"
        add_question(image_id, hero_color, [
            {"operation": "select", "argument": f"{cls_a} ({hero})", "dependencies": [],
             "text": f"Is the {cls_a} {options.replace('|', ' or ')}?"},
            {"operation": "choose color", "argument": options, "dependencies": [0]},
        ])

    paths = {
        "scene_graphs": root / "scene_graphs.json",
        "questions": root / "questions.json",
        "features": features_dir,
        "embeddings": root / "embeddings.txt",
    }
    paths["scene_graphs"].write_text(json.dumps(graphs, indent=1, sort_keys=True))
    paths["questions"].write_text(json.dumps(questions, indent=1, sort_keys=True))
    write_symbolic_embeddings(paths["embeddings"])

    table = load_embeddings(paths["embeddings"])
    enc = EncoderConfig.create(encode_dim, table, seed=7)
    bundle = load_bundle(paths["scene_graphs"], paths["questions"])
    for image_id in sorted(bundle.scene_graphs):
        matrix, dets = encode_scene(bundle.scene_graphs[image_id], enc)
        write_feature_file(
            features_dir / f"{image_id}.smfx", matrix, [d.bbox for d in dets]
        )
    return paths


def _single_row_graph_objects(rows: list[tuple[str, str, list[str]]]) -> dict:
    """Objects laid out on the grid: (object_id, class, attributes) triples."""
    objects = {}
    for slot, (object_id, class_label, attributes) in enumerate(rows):
        objects[object_id] = {
            "name": class_label,
            "attributes": attributes,
            "relations": [],
            **_grid_box(slot),
        }
    return objects


def _write_rows(path: Path, objects: dict, rows_by_object: dict[str, list[float]]) -> None:
    """Feature file whose row order matches sorted object ids."""
    ordered = sorted(objects)
    boxes = []
    rows = []
    for object_id in ordered:
        o = objects[object_id]
        boxes.append(
            BoundingBox(o["x"], o["y"], o["x"] + o["w"], o["y"] + o["h"])
        )
        rows.append(rows_by_object[object_id])
    write_feature_file(path, FeatureMatrix(np.array(rows, dtype=np.float32)), boxes)


def build_adversarial_fixture(root: str | Path) -> dict[str, Path]:
    """Write the baseline-flipping dataset under root; returns its paths.

    Construction (feature dimension 4, first component carries signal):

    * training: two one-object images, mean features (-8,0,0,0) -> "red"
      and (+8,0,0,0) -> "blue", both under the question key
      (query, (color,)).
    * 10 flip images: relevant "box" at (-2,0,0,0) plus a context "car" at
      (0,0,0,0); every class-swap donor for "car" (the other 11 vehicle
      classes, all living in one donor image) carries (+40,0,0,0), so any
      swap moves the mean from (-1,..) to (+19,..), crossing to "blue".
    * 10 stable images: same, but the context is a "tree" whose plant
      donors all carry (-2,0,0,0); the mean stays negative.
    * 2 questions with an unseen key (query, (material,)): the majority
      fallback answers "blue", which is wrong.

    Expected report: N=22, accuracy 90.91, context reliance 50.00,
    effective accuracy 45.45.
    """
    root = Path(root)
    for sub in ("features", "train_features"):
        (root / sub).mkdir(parents=True, exist_ok=True)

    groups = {0: FAMILIES["vehicle"], 1: FAMILIES["plant"], 2: ["box"]}
    groups[3] = COLORS
    embeddings = root / "embeddings.txt"
    _write_embeddings(embeddings, groups)

    graphs: dict[str, dict] = {}
    questions: dict[str, dict] = {}
    rows: dict[str, dict[str, list[float]]] = {}

    def color_question(qid: str, image_id: str, box_id: str) -> None:
        questions[qid] = {
            "imageId": image_id,
            "question": "What color is the box?",
            "answer": "red",
            "semantic": [
                {"operation": "select", "argument": f"box ({box_id})", "dependencies": []},
                {"operation": "query", "argument": "color", "dependencies": [0]},
            ],
        }

    for t in range(10):
        image_id = f"flip{t}"
        graphs[image_id] = {
            "width": 640, "height": 480,
            "objects": _single_row_graph_objects(
                [("o0", "box", ["red"]), ("o1", "car", ["black"])]
            ),
        }
        rows[image_id] = {"o0": [-2, 0, 0, 0], "o1": [0, 0, 0, 0]}
        color_question(f"f{t}", image_id, "o0")
    for t in range(10):
        image_id = f"stab{t}"
        graphs[image_id] = {
            "width": 640, "height": 480,
            "objects": _single_row_graph_objects(
                [("o0", "box", ["red"]), ("o1", "tree", ["green"])]
            ),
        }
        rows[image_id] = {"o0": [-2, 0, 0, 0], "o1": [0, 0, 0, 0]}
        color_question(f"s{t}", image_id, "o0")
    for t in range(2):
        image_id = f"mat{t}"
        graphs[image_id] = {
            "width": 640, "height": 480,
            "objects": _single_row_graph_objects([("o0", "box", ["red", "wooden"])]),
        }
        rows[image_id] = {"o0": [-2, 0, 0, 0]}
        questions[f"m{t}"] = {
            "imageId": image_id,
            "question": "What material is the box?",
            "answer": "wooden",
            "semantic": [
                {"operation": "select", "argument": "box (o0)", "dependencies": []},
                {"operation": "query", "argument": "material", "dependencies": [0]},
            ],
        }

    donor_vehicles = [c for c in FAMILIES["vehicle"] if c != "car"]
    graphs["donor_veh"] = {
        "width": 640, "height": 480,
        "objects": _single_row_graph_objects(
            [(f"o{n}", cls, [COLORS[n % 12]]) for n, cls in enumerate(donor_vehicles)]
        ),
    }
    rows["donor_veh"] = {f"o{n}": [40, 0, 0, 0] for n in range(len(donor_vehicles))}
    donor_plants = [c for c in FAMILIES["plant"] if c != "tree"]
    graphs["donor_pla"] = {
        "width": 640, "height": 480,
        "objects": _single_row_graph_objects(
            [(f"o{n}", cls, [COLORS[n % 12]]) for n, cls in enumerate(donor_plants)]
        ),
    }
    rows["donor_pla"] = {f"o{n}": [-2, 0, 0, 0] for n in range(len(donor_plants))}

    train_graphs = {
        "train_red": {
            "width": 640, "height": 480,
            "objects": _single_row_graph_objects([("o0", "box", ["red"])]),
        },
        "train_blue": {
            "width": 640, "height": 480,
            "objects": _single_row_graph_objects([("o0", "box", ["blue"])]),
        },
    }
    train_rows = {"train_red": {"o0": [-8, 0, 0, 0]}, "train_blue": {"o0": [8, 0, 0, 0]}}
    train_questions = {
        "t0": {
            "imageId": "train_red",
            "question": "What color is the box?",
            "answer": "red",
            "semantic": [
                {"operation": "select", "argument": "box (o0)", "dependencies": []},
                {"operation": "query", "argument": "color", "dependencies": [0]},
            ],
        },
        "t1": {
            "imageId": "train_blue",
            "question": "What color is the box?",
            "answer": "blue",
            "semantic": [
                {"operation": "select", "argument": "box (o0)", "dependencies": []},
                {"operation": "query", "argument": "color", "dependencies": [0]},
            ],
        },
    }

    paths = {
        "scene_graphs": root / "scene_graphs.json",
        "questions": root / "questions.json",
        "features": root / "features",
        "embeddings": embeddings,
        "train_scene_graphs": root / "train_scene_graphs.json",
        "train_questions": root / "train_questions.json",
        "train_features": root / "train_features",
    }
    paths["scene_graphs"].write_text(json.dumps(graphs, indent=1, sort_keys=True))
    paths["questions"].write_text(json.dumps(questions, indent=1, sort_keys=True))
    paths["train_scene_graphs"].write_text(json.dumps(train_graphs, indent=1, sort_keys=True))
    paths["train_questions"].write_text(json.dumps(train_questions, indent=1, sort_keys=True))
    for image_id, graph in graphs.items():
        _write_rows(paths["features"] / f"{image_id}.smfx", graph["objects"], rows[image_id])
    for image_id, graph in train_graphs.items():
        _write_rows(
            paths["train_features"] / f"{image_id}.smfx",
            graph["objects"],
            train_rows[image_id],
        )
    return paths

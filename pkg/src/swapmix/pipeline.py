"""End-to-end orchestration shared by the CLI commands.

The monolithic diagnose run and the staged plan/perturb/evaluate commands
all call the same functions with the same seeds, so their artifacts are
byte-identical. All output files are written atomically (temp + rename).
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from .augment import AugmentConfig, augment_features
from .context import MatchTable, identify_context, match_detections
from .domain import ContextSet, DetectedObject, EmbeddingTable, FeatureMatrix, Question, SceneGraph
from .encoder import EncoderConfig, encode_scene
from .errors import MalformedInput, UnsupportedOperation
from .ingestion import DatasetBundle, load_bundle, load_embeddings, write_feature_file
from .metrics import RobustnessReport, compute_report, emit_report
from .models import (
    AnswerLogEntry,
    BaselineModel,
    bridge_export,
    bridge_import,
    model_answer,
    read_answer_file,
    read_skips_file,
    symbolic_execute,
    symbolic_execute_on_swapped,
    write_answer_file,
    write_skips_file,
)
from .perturb import Resolver, enumerate_perturbations, make_frcnn_resolver, make_perfect_resolver
from .swapplan import PlanRow, SwapPlan, build_swap_plan, read_plan_file, write_plan_file


@dataclass
class RunConfig:
    """Resolved settings for one pipeline run."""

    scene_graphs: Path
    questions: Path
    out: Path
    embeddings: Path | None = None
    features: Path | None = None
    k: int = 10
    sim_threshold: float = 0.5
    iou_threshold: float = 0.5
    seed: int = 0
    mode: str = "frcnn"
    context_def: str = "selected"
    model: str = "symbolic"
    jobs: int = 1
    dump_features: Path | None = None
    encode_dim: int = 32
    train_scene_graphs: Path | None = None
    train_questions: Path | None = None
    train_features: Path | None = None
    p_swap: float = 0.5
    p_class: float = 0.5
    epoch: int = 0
    answers: Path | None = None
    job_dir: Path | None = None

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.jobs < 1:
            raise ValueError(f"jobs must be >= 1, got {self.jobs}")

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            out[f.name] = str(value) if isinstance(value, Path) else value
        return out


@dataclass
class QuestionSetup:
    """Everything needed to perturb and evaluate one question."""

    question: Question
    graph: SceneGraph
    V: FeatureMatrix
    dets: tuple[DetectedObject, ...]
    mt: MatchTable
    ctx: ContextSet
    plan: SwapPlan


def atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def atomic_write_smfx(path: Path, matrix: FeatureMatrix, boxes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    write_feature_file(tmp, matrix, boxes)
    os.replace(tmp, path)


def _write_jsonl_atomic(path: Path, records: Iterable[dict]) -> None:
    lines = [json.dumps(r, sort_keys=True, separators=(",", ":")) for r in records]
    atomic_write_text(path, "".join(line + "\n" for line in lines))


def load_inputs(cfg: RunConfig) -> tuple[DatasetBundle, EmbeddingTable]:
    if cfg.embeddings is None:
        raise MalformedInput("--embeddings is required")
    features_dir = cfg.features if cfg.mode == "frcnn" else None
    if cfg.mode == "frcnn" and cfg.features is None:
        raise MalformedInput("--features is required in frcnn mode")
    bundle = load_bundle(cfg.scene_graphs, cfg.questions, features_dir=features_dir)
    table = load_embeddings(cfg.embeddings)
    return bundle, table


@dataclass
class Prepared:
    setups: list[QuestionSetup]
    excluded: list[tuple[str, str]]
    encoder: EncoderConfig | None
    match_tables: dict[str, MatchTable] = field(default_factory=dict)


def build_setups(cfg: RunConfig, bundle: DatasetBundle, table: EmbeddingTable) -> Prepared:
    """Run matching, context identification, and planning for each question."""
    encoder = None
    encoded: dict[str, tuple[FeatureMatrix, tuple[DetectedObject, ...]]] = {}
    if cfg.mode == "perfect":
        encoder = EncoderConfig.create(cfg.encode_dim, table, cfg.seed)
        for image_id in sorted(bundle.scene_graphs):
            matrix, dets = encode_scene(bundle.scene_graphs[image_id], encoder)
            encoded[image_id] = (matrix, tuple(dets))
    source = encoded if cfg.mode == "perfect" else bundle.features
    match_tables = {
        image_id: match_detections(
            bundle.scene_graphs[image_id], list(loaded[1]), cfg.iou_threshold
        )
        for image_id, loaded in source.items()
        if image_id in bundle.scene_graphs
    }
    setups: list[QuestionSetup] = []
    excluded: list[tuple[str, str]] = []
    for q in bundle.questions:
        loaded = source.get(q.image_id)
        if loaded is None:
            excluded.append((q.question_id, f"no features for image {q.image_id}"))
            continue
        V, dets = loaded
        graph = bundle.scene_graphs[q.image_id]
        mt = match_tables[q.image_id]
        ctx = identify_context(q, graph, mt, cfg.context_def)
        plan = build_swap_plan(
            q, ctx, mt, bundle, table, cfg.k, cfg.sim_threshold, cfg.seed, mode=cfg.mode
        )
        setups.append(QuestionSetup(q, graph, V, dets, mt, ctx, plan))
    return Prepared(setups, excluded, encoder, match_tables)


def resolver_for(cfg: RunConfig, bundle: DatasetBundle, prepared: Prepared, setup: QuestionSetup) -> Resolver:
    if cfg.mode == "perfect":
        return make_perfect_resolver(setup.graph, prepared.encoder)
    return make_frcnn_resolver(bundle, prepared.match_tables)


def _evaluate_symbolic(setup: QuestionSetup) -> tuple[
    list[AnswerLogEntry], list[tuple[str, int, str]], tuple[str, str] | None
]:
    q = setup.question
    try:
        base = symbolic_execute(q.program, setup.graph)
    except UnsupportedOperation as e:
        return [], [], (q.question_id, str(e))
    except Exception:
        base = "⟂"
    entries = [AnswerLogEntry(q.question_id, 0, base)]
    for pert_id, cand in setup.plan.candidates():
        object_id = setup.mt.object_for(cand.source_detection_index)
        try:
            answer = symbolic_execute_on_swapped(
                q.program,
                setup.graph,
                {object_id: (cand.donor_class, cand.donor_attributes)},
            )
        except Exception:
            answer = "⟂"
        entries.append(AnswerLogEntry(q.question_id, pert_id, answer))
    return entries, [], None


def _evaluate_with_features(
    setup: QuestionSetup, model, resolve: Resolver
) -> tuple[list[AnswerLogEntry], list[tuple[str, int, str]], tuple[str, str] | None]:
    q = setup.question
    entries = [AnswerLogEntry(q.question_id, 0, model_answer(model, setup.V, q))]
    skips: list[tuple[str, int, str]] = []
    for record, perturbed in enumerate_perturbations(setup.V, setup.plan, resolve):
        if record.skip_reason is not None:
            skips.append((q.question_id, record.pert_id, record.skip_reason))
            continue
        entries.append(
            AnswerLogEntry(q.question_id, record.pert_id, model_answer(model, perturbed, q))
        )
    return entries, skips, None


def _features_for_bundle(
    cfg: RunConfig, bundle: DatasetBundle, table: EmbeddingTable
) -> Mapping[str, tuple[FeatureMatrix, tuple[DetectedObject, ...]]]:
    if cfg.mode == "frcnn":
        return bundle.features
    encoder = EncoderConfig.create(cfg.encode_dim, table, cfg.seed)
    out: dict[str, tuple[FeatureMatrix, tuple[DetectedObject, ...]]] = {}
    for image_id in sorted(bundle.scene_graphs):
        matrix, dets = encode_scene(bundle.scene_graphs[image_id], encoder)
        out[image_id] = (matrix, tuple(dets))
    return out


def _fit_baseline(cfg: RunConfig, bundle: DatasetBundle, table: EmbeddingTable) -> BaselineModel:
    train_paths = (cfg.train_scene_graphs, cfg.train_questions)
    if any(train_paths) and not all(train_paths):
        raise MalformedInput(
            "--train-scene-graphs and --train-questions must be given together"
        )
    if cfg.train_scene_graphs is not None:
        features_dir = cfg.train_features if cfg.mode == "frcnn" else None
        if cfg.mode == "frcnn" and features_dir is None:
            raise MalformedInput("--train-features is required in frcnn mode")
        train_bundle = load_bundle(
            cfg.train_scene_graphs, cfg.train_questions, features_dir=features_dir
        )
    else:
        train_bundle = bundle
    return BaselineModel.fit(train_bundle, _features_for_bundle(cfg, train_bundle, table))


def run_model(
    cfg: RunConfig,
    bundle: DatasetBundle,
    table: EmbeddingTable,
    prepared: Prepared,
) -> tuple[list[AnswerLogEntry], list[tuple[str, int, str]], list[tuple[str, str]]]:
    """Evaluate the configured built-in model over all planned perturbations."""
    if cfg.model == "symbolic":
        def work(setup: QuestionSetup):
            return _evaluate_symbolic(setup)
    elif cfg.model == "baseline":
        model = _fit_baseline(cfg, bundle, table)

        def work(setup: QuestionSetup):
            return _evaluate_with_features(
                setup, model, resolver_for(cfg, bundle, prepared, setup)
            )
    else:
        raise MalformedInput(f"model {cfg.model!r} cannot be evaluated in-process")
    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(work, prepared.setups))
    else:
        results = [work(s) for s in prepared.setups]
    entries: list[AnswerLogEntry] = []
    skips: list[tuple[str, int, str]] = []
    excluded: list[tuple[str, str]] = []
    for setup_entries, setup_skips, exclusion in results:
        entries.extend(setup_entries)
        skips.extend(setup_skips)
        if exclusion is not None:
            excluded.append(exclusion)
    return entries, skips, excluded


def write_plan_artifacts(out: Path, prepared: Prepared) -> None:
    out.mkdir(parents=True, exist_ok=True)
    tmp = out / "plans.jsonl.tmp"
    write_plan_file(tmp, (s.plan for s in prepared.setups))
    os.replace(tmp, out / "plans.jsonl")
    _write_jsonl_atomic(
        out / "excluded.jsonl",
        ({"question_id": qid, "reason": reason} for qid, reason in prepared.excluded),
    )


def dump_perturbed_features(
    cfg: RunConfig, bundle: DatasetBundle, prepared: Prepared, dump_dir: Path
) -> list[tuple[str, int, str]]:
    """Write {question_id}.{pert_id}.smfx for pert 0 plus every candidate."""
    dump_dir.mkdir(parents=True, exist_ok=True)
    skips: list[tuple[str, int, str]] = []
    for setup in prepared.setups:
        boxes = [d.bbox for d in setup.dets]
        qid = setup.question.question_id
        atomic_write_smfx(dump_dir / f"{qid}.0.smfx", setup.V, boxes)
        resolve = resolver_for(cfg, bundle, prepared, setup)
        for record, perturbed in enumerate_perturbations(setup.V, setup.plan, resolve):
            if record.skip_reason is not None:
                skips.append((qid, record.pert_id, record.skip_reason))
                continue
            atomic_write_smfx(dump_dir / f"{qid}.{record.pert_id}.smfx", perturbed, boxes)
    return skips


def _write_eval_artifacts(
    out: Path,
    entries: list[AnswerLogEntry],
    skips: list[tuple[str, int, str]],
    excluded: list[tuple[str, str]],
    report: RobustnessReport,
) -> None:
    tmp = out / "answers.jsonl.tmp"
    write_answer_file(tmp, entries)
    os.replace(tmp, out / "answers.jsonl")
    tmp = out / "skips.jsonl.tmp"
    write_skips_file(tmp, skips)
    os.replace(tmp, out / "skips.jsonl")
    _write_jsonl_atomic(
        out / "excluded.jsonl",
        ({"question_id": qid, "reason": reason} for qid, reason in excluded),
    )
    write_report_files(out, report)


def write_report_files(out: Path, report: RobustnessReport) -> None:
    out.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out / "report.json", emit_report(report, "json"))
    atomic_write_text(out / "report.txt", emit_report(report, "text"))
    atomic_write_text(out / "report.csv", emit_report(report, "csv"))


def cmd_plan(cfg: RunConfig) -> int:
    bundle, table = load_inputs(cfg)
    prepared = build_setups(cfg, bundle, table)
    write_plan_artifacts(cfg.out, prepared)
    return 0


def cmd_perturb(cfg: RunConfig) -> int:
    bundle, table = load_inputs(cfg)
    prepared = build_setups(cfg, bundle, table)
    write_plan_artifacts(cfg.out, prepared)
    dump_dir = cfg.dump_features or (cfg.out / "features")
    skips = dump_perturbed_features(cfg, bundle, prepared, dump_dir)
    tmp = cfg.out / "skips.jsonl.tmp"
    write_skips_file(tmp, skips)
    os.replace(tmp, cfg.out / "skips.jsonl")
    return 0


def _evaluate_prepared(
    cfg: RunConfig, bundle: DatasetBundle, table: EmbeddingTable, prepared: Prepared
) -> RobustnessReport:
    entries, skips, eval_excluded = run_model(cfg, bundle, table, prepared)
    excluded = prepared.excluded + eval_excluded
    plan_rows = [
        PlanRow(s.plan.question_id, pert_id, cand)
        for s in prepared.setups
        for pert_id, cand in s.plan.candidates()
    ]
    report = compute_report(bundle.questions, entries, plan_rows, skips, excluded)
    cfg.out.mkdir(parents=True, exist_ok=True)
    _write_eval_artifacts(cfg.out, entries, skips, excluded, report)
    return report


def cmd_evaluate(cfg: RunConfig) -> int:
    bundle, table = load_inputs(cfg)
    prepared = build_setups(cfg, bundle, table)
    write_plan_artifacts(cfg.out, prepared)
    if cfg.answers is not None:
        entries = read_answer_file(cfg.answers)
        skips_path = cfg.out / "skips.jsonl"
        skips = read_skips_file(skips_path) if skips_path.exists() else []
        plan_rows = [
            PlanRow(s.plan.question_id, pert_id, cand)
            for s in prepared.setups
            for pert_id, cand in s.plan.candidates()
        ]
        report = compute_report(
            bundle.questions, entries, plan_rows, skips, prepared.excluded
        )
        write_report_files(cfg.out, report)
    else:
        report = _evaluate_prepared(cfg, bundle, table, prepared)
    print(emit_report(report, "text"), end="")
    return 0


def cmd_diagnose(cfg: RunConfig) -> int:
    if cfg.model == "bridge":
        return cmd_export_bridge(cfg)
    bundle, table = load_inputs(cfg)
    prepared = build_setups(cfg, bundle, table)
    write_plan_artifacts(cfg.out, prepared)
    if cfg.dump_features is not None:
        dump_perturbed_features(cfg, bundle, prepared, cfg.dump_features)
    report = _evaluate_prepared(cfg, bundle, table, prepared)
    print(emit_report(report, "text"), end="")
    return 0


def cmd_export_bridge(cfg: RunConfig) -> int:
    bundle, table = load_inputs(cfg)
    prepared = build_setups(cfg, bundle, table)
    job = cfg.job_dir or cfg.out

    def stream() -> Iterator[tuple]:
        for setup in prepared.setups:
            boxes = [d.bbox for d in setup.dets]
            qid = setup.question.question_id
            yield qid, 0, setup.V, boxes, None
            resolve = resolver_for(cfg, bundle, prepared, setup)
            for record, perturbed in enumerate_perturbations(setup.V, setup.plan, resolve):
                yield qid, record.pert_id, perturbed, boxes, record.skip_reason

    bridge_export(
        job,
        [s.question for s in prepared.setups],
        [s.plan for s in prepared.setups],
        stream(),
    )
    _write_jsonl_atomic(
        job / "excluded.jsonl",
        ({"question_id": qid, "reason": reason} for qid, reason in prepared.excluded),
    )
    print(f"bridge job exported to {job}")
    return 0


def cmd_import_bridge(cfg: RunConfig) -> int:
    if cfg.job_dir is None:
        raise MalformedInput("--job-dir is required for import-bridge")
    job = cfg.job_dir
    entries = bridge_import(job)
    plan_rows = read_plan_file(job / "plans.jsonl")
    skips_path = job / "skips.jsonl"
    skips = read_skips_file(skips_path) if skips_path.exists() else []
    excluded: list[tuple[str, str]] = []
    excluded_path = job / "excluded.jsonl"
    if excluded_path.exists():
        with open(excluded_path, encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if line:
                    raw = json.loads(line)
                    excluded.append((str(raw["question_id"]), str(raw["reason"])))
    bundle = load_bundle(cfg.scene_graphs, cfg.questions)
    job_qids = {e.question_id for e in entries} | {qid for qid, _ in excluded}
    questions = [q for q in bundle.questions if q.question_id in job_qids]
    report = compute_report(questions, entries, plan_rows, skips, excluded)
    cfg.out.mkdir(parents=True, exist_ok=True)
    tmp = cfg.out / "answers.jsonl.tmp"
    write_answer_file(tmp, entries)
    os.replace(tmp, cfg.out / "answers.jsonl")
    write_report_files(cfg.out, report)
    print(emit_report(report, "text"), end="")
    return 0


def cmd_augment(cfg: RunConfig) -> int:
    bundle, table = load_inputs(cfg)
    prepared = build_setups(cfg, bundle, table)
    aug = AugmentConfig(
        p_swap=cfg.p_swap,
        p_class=cfg.p_class,
        k=cfg.k,
        sim_threshold=cfg.sim_threshold,
        seed=cfg.seed,
        epoch=cfg.epoch,
    )
    out_dir = cfg.out / "augmented"
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest: list[dict] = []
    for setup in prepared.setups:
        resolve = resolver_for(cfg, bundle, prepared, setup)
        augmented, applied = augment_features(
            setup.V, setup.ctx, setup.mt, bundle, table, aug, resolve, mode=cfg.mode
        )
        atomic_write_smfx(
            out_dir / f"{setup.question.question_id}.smfx",
            augmented,
            [d.bbox for d in setup.dets],
        )
        manifest.extend(applied)
    _write_jsonl_atomic(cfg.out / "manifest.jsonl", manifest)
    return 0

import csv
import io
import json

import numpy as np
import pytest

import oracles
from swapmix.domain import Question, ReasoningStep
from swapmix.errors import IncompleteLog
from swapmix.metrics import compute_report, emit_report, report_as_dict, round2
from swapmix.models import AnswerLogEntry
from swapmix.swapplan import PlanRow, SwapCandidate


def question(qid, gt="red"):
    return Question(
        qid,
        "img",
        "text",
        gt,
        (
            ReasoningStep(0, "select", ("car",), (), ("o1",)),
            ReasoningStep(1, "query", ("color",), (0,), ()),
        ),
    )


def row(qid, pid, kind="class"):
    return PlanRow(
        qid,
        pid,
        SwapCandidate(
            kind=kind,
            source_detection_index=0,
            donor_image="x",
            donor_object="y",
            donor_class="truck",
            donor_attributes=frozenset(),
        ),
    )


def entries(answer_map):
    return [AnswerLogEntry(q, p, a) for (q, p), a in sorted(answer_map.items())]


class TestRound2:
    def test_half_even(self):
        assert round2(0.125) == 0.12
        assert round2(0.135) == 0.14
        assert round2(90.909090) == 90.91


class TestComputeReport:
    def test_basic_counts(self):
        questions = [question("q1"), question("q2"), question("q3")]
        plan = [row("q1", 1), row("q2", 1), row("q3", 1, "attribute")]
        answers = {
            ("q1", 0): "red", ("q1", 1): "red",       # stable correct
            ("q2", 0): "red", ("q2", 1): "blue",      # flipped by class swap
            ("q3", 0): "blue", ("q3", 1): "red",      # wrong at base
        }
        rep = compute_report(questions, entries(answers), plan)
        assert (rep.n_total, rep.n) == (3, 3)
        assert rep.n_correct0 == 2
        assert rep.n_changed == 1
        assert rep.n_changed_class == 1
        assert rep.n_changed_attr == 0
        assert rep.n_q1 == 1
        assert rep.accuracy == pytest.approx(200 / 3)
        assert rep.context_reliance == pytest.approx(50.0)
        assert rep.effective_accuracy == pytest.approx(100 / 3)

    def test_change_on_incorrect_base_not_reliance(self):
        questions = [question("q1")]
        plan = [row("q1", 1)]
        answers = {("q1", 0): "blue", ("q1", 1): "green"}
        rep = compute_report(questions, entries(answers), plan)
        assert rep.n_changed == 0
        assert rep.per_question[0].changed_by == (1,)  # still recorded

    def test_both_kinds_counted_when_both_flip(self):
        questions = [question("q1")]
        plan = [row("q1", 1, "class"), row("q1", 2, "attribute")]
        answers = {("q1", 0): "red", ("q1", 1): "x", ("q1", 2): "y"}
        rep = compute_report(questions, entries(answers), plan)
        assert rep.n_changed == 1
        assert rep.n_changed_class == 1
        assert rep.n_changed_attr == 1

    def test_skipped_pairs_not_expected(self):
        questions = [question("q1")]
        plan = [row("q1", 1), row("q1", 2)]
        answers = {("q1", 0): "red", ("q1", 1): "red"}
        rep = compute_report(
            questions, entries(answers), plan, skipped=[("q1", 2, "donor unmatched")]
        )
        assert rep.n_skipped_swaps == 1
        assert rep.n_q1 == 1

    def test_excluded_questions_dropped_from_everything(self):
        questions = [question("q1"), question("q2")]
        plan = [row("q1", 1), row("q2", 1)]
        answers = {("q1", 0): "red", ("q1", 1): "red"}
        rep = compute_report(
            questions, entries(answers), plan, excluded=[("q2", "no features")]
        )
        assert (rep.n_total, rep.n) == (2, 1)
        assert rep.excluded == (("q2", "no features"),)
        assert rep.accuracy == 100.0

    def test_missing_answer_raises(self):
        questions = [question("q1")]
        plan = [row("q1", 1)]
        with pytest.raises(IncompleteLog) as exc:
            compute_report(questions, entries({("q1", 0): "red"}), plan)
        assert exc.value.pairs == [("q1", 1)]

    def test_unexpected_answer_raises(self):
        questions = [question("q1")]
        answers = {("q1", 0): "red", ("q1", 9): "red"}
        with pytest.raises(IncompleteLog) as exc:
            compute_report(questions, entries(answers), [])
        assert exc.value.pairs == [("q1", 9)]

    def test_conflict_detected_before_missing(self):
        questions = [question("q1")]
        plan = [row("q1", 1)]
        logs = [
            AnswerLogEntry("q1", 0, "red"),
            AnswerLogEntry("q1", 0, "blue"),
        ]
        with pytest.raises(IncompleteLog, match="conflict"):
            compute_report(questions, logs, plan)

    def test_empty_denominators(self):
        rep = compute_report([], [], [])
        assert rep.accuracy == 0.0
        assert rep.context_reliance == 0.0
        assert rep.effective_accuracy == 0.0


class TestRandomizedOracle:
    def test_matches_brute_force_recount(self):
        rng = np.random.default_rng(42)
        vocab = ["red", "blue", "green"]
        for trial in range(60):
            n_q = int(rng.integers(1, 6))
            questions = []
            plan = []
            answers = {}
            plan_kinds = {}
            skipped = []
            for i in range(n_q):
                qid = f"q{i}"
                gt = vocab[int(rng.integers(len(vocab)))]
                questions.append(question(qid, gt))
                answers[(qid, 0)] = vocab[int(rng.integers(len(vocab)))]
                n_pert = int(rng.integers(0, 5))
                for pid in range(1, n_pert + 1):
                    kind = "class" if rng.random() < 0.5 else "attribute"
                    plan.append(row(qid, pid, kind))
                    if rng.random() < 0.15:
                        skipped.append((qid, pid, "skip"))
                        continue
                    plan_kinds[(qid, pid)] = kind
                    answers[(qid, pid)] = vocab[int(rng.integers(len(vocab)))]
            excluded = []
            if n_q > 1 and rng.random() < 0.3:
                drop = f"q{int(rng.integers(n_q))}"
                excluded.append((drop, "why"))
                answers = {
                    (q, p): a for (q, p), a in answers.items() if q != drop
                }
            rep = compute_report(questions, entries(answers), plan, skipped, excluded)
            want = oracles.recount_report(
                [(q.question_id, q.gt_answer) for q in questions],
                answers,
                plan_kinds,
                skipped={(q, p) for q, p, _ in skipped},
                excluded={q for q, _ in excluded},
            )
            assert rep.n_total == want["n_total"], trial
            assert rep.n == want["n"], trial
            assert rep.n_correct0 == want["correct0"], trial
            assert rep.n_changed == want["changed"], trial
            assert rep.n_changed_class == want["changed_class"], trial
            assert rep.n_changed_attr == want["changed_attr"], trial
            assert rep.n_q1 == want["q1"], trial
            assert rep.accuracy == want["accuracy"], trial
            assert rep.context_reliance == want["context_reliance"], trial
            assert rep.effective_accuracy == want["effective_accuracy"], trial


class TestEmit:
    def report(self):
        questions = [question("q1"), question("q2")]
        plan = [row("q1", 1), row("q2", 1)]
        answers = {
            ("q1", 0): "red", ("q1", 1): "red",
            ("q2", 0): "red", ("q2", 1): "blue",
        }
        return compute_report(questions, entries(answers), plan)

    def test_json_is_canonical_and_versioned(self):
        text = emit_report(self.report(), "json")
        data = json.loads(text)
        assert data["schema"] == 1
        assert text == json.dumps(data, sort_keys=True, indent=2) + "\n"
        assert data["accuracy"] == 100.0
        assert data["context_reliance"] == 50.0
        assert data["effective_accuracy"] == 50.0

    def test_text_contains_header_and_denominators(self):
        text = emit_report(self.report(), "text")
        assert "Acc." in text
        assert "Context Reliance" in text
        assert "Effective Acc." in text
        assert "questions evaluated: 2 of 2" in text
        assert "100.00" in text and "50.00" in text

    def test_csv_round_trips(self):
        text = emit_report(self.report(), "csv")
        rows = list(csv.reader(io.StringIO(text)))
        assert rows[0][:4] == ["n_total", "n", "excluded", "skipped_swaps"]
        record = dict(zip(rows[0], rows[1]))
        assert record["accuracy"] == "100.00"
        assert record["context_reliance"] == "50.00"

    def test_unknown_format(self):
        with pytest.raises(ValueError):
            emit_report(self.report(), "yaml")

    def test_dict_includes_per_question(self):
        data = report_as_dict(self.report())
        assert {o["question_id"] for o in data["per_question"]} == {"q1", "q2"}
        flipped = next(o for o in data["per_question"] if o["question_id"] == "q2")
        assert flipped["changed_by"] == [1]
        assert flipped["q_i"] == 0

"""Independent reference implementations used to cross-check the package.

Everything here is deliberately written the slow, obvious way (pure Python
loops, direct definitions) so agreement with the library is meaningful.
"""

from __future__ import annotations

import math

import numpy as np


def replace_row(rows: np.ndarray, j: int, donor) -> np.ndarray:
    """Direct row replacement; what a feature swap must equal bitwise."""
    out = np.array(rows, dtype=np.float32, copy=True)
    out[j, :] = np.asarray(donor, dtype=np.float32)
    return out


def cosine(u, v) -> float:
    nu = math.sqrt(sum(float(x) * float(x) for x in u))
    nv = math.sqrt(sum(float(x) * float(x) for x in v))
    return sum(float(a) * float(b) for a, b in zip(u, v)) / (nu * nv)


def rank_classes(label: str, vectors: dict, k: int, threshold: float) -> list[str]:
    """Swap candidates before padding: by similarity desc, name asc, cut at k."""
    scored = [
        (name, cosine(vectors[label], vec))
        for name, vec in vectors.items()
        if name != label
    ]
    scored.sort(key=lambda t: (-t[1], t[0]))
    return [name for name, sim in scored if sim >= threshold][:k]


def recount_report(
    questions: list[tuple[str, str]],
    answers: dict[tuple[str, int], str],
    plan_kinds: dict[tuple[str, int], str],
    skipped: set[tuple[str, int]] = frozenset(),
    excluded: set[str] = frozenset(),
) -> dict:
    """Recount every reported number straight from the definitions.

    questions: (question_id, normalized ground truth) pairs, one per question.
    answers: (question_id, pert_id) -> normalized answer, pert 0 included.
    plan_kinds: (question_id, pert_id) -> "class" | "attribute".
    """
    evaluated = [(qid, gt) for qid, gt in questions if qid not in excluded]
    n = len(evaluated)
    n_correct0 = n_changed = n_changed_class = n_changed_attr = n_q1 = 0
    for qid, gt in evaluated:
        base = answers[(qid, 0)]
        pids = sorted(
            pid
            for (q, pid) in plan_kinds
            if q == qid and (q, pid) not in skipped
        )
        correct0 = base == gt
        diffs = [pid for pid in pids if answers[(qid, pid)] != base]
        all_correct = correct0 and all(answers[(qid, pid)] == gt for pid in pids)
        if correct0:
            n_correct0 += 1
            if diffs:
                n_changed += 1
                kinds = {plan_kinds[(qid, pid)] for pid in diffs}
                if "class" in kinds:
                    n_changed_class += 1
                if "attribute" in kinds:
                    n_changed_attr += 1
        if all_correct:
            n_q1 += 1
    def pct(num, den):
        return 100.0 * num / den if den else 0.0
    return {
        "n_total": len(questions),
        "n": n,
        "correct0": n_correct0,
        "changed": n_changed,
        "changed_class": n_changed_class,
        "changed_attr": n_changed_attr,
        "q1": n_q1,
        "accuracy": pct(n_correct0, n),
        "context_reliance": pct(n_changed, n_correct0),
        "class_reliance": pct(n_changed_class, n_correct0),
        "attr_reliance": pct(n_changed_attr, n_correct0),
        "effective_accuracy": pct(n_q1, n),
    }

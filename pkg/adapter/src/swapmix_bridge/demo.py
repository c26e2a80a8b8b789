"""Tiny reference answer functions, mostly for wiring checks.

Real models plug in the same way: a callable taking (features, boxes,
question_text) and returning an answer string.
"""

from __future__ import annotations

import numpy as np


def constant_yes(features: np.ndarray, boxes: np.ndarray, question: str) -> str:
    return "yes"


def mean_sign(features: np.ndarray, boxes: np.ndarray, question: str) -> str:
    """Answers from the sign of the mean feature value; perturbation-sensitive."""
    return "positive" if float(features.mean()) > 0 else "negative"

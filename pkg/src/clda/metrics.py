"""Accuracy reporting against true labels, plus multi-seed aggregation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

DEFAULT_SEEDS = (13, 27, 250, 583, 915)


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    per_class_accuracy: np.ndarray  # (|Y|,), nan for classes with no truth
    confusion: np.ndarray           # (|Y|, |Y|), rows = truth, cols = predicted
    count: int


@dataclass(frozen=True)
class SeedSummary:
    """Mean and population std of per-run accuracies."""

    mean: float
    std: float
    count: int
    accuracies: tuple[float, ...]


def evaluate(
    predictions: np.ndarray,
    truths: np.ndarray,
    num_labels: int | None = None,
) -> EvalReport:
    """Accuracy, per-class accuracy, and confusion counts.

    num_labels fixes the confusion matrix size; when omitted it is
    inferred from the largest label seen.
    """
    predictions = np.asarray(predictions, dtype=np.int64)
    truths = np.asarray(truths, dtype=np.int64)
    if predictions.shape != truths.shape or predictions.ndim != 1:
        raise ValueError(
            f"expected matching 1-d label vectors, got {predictions.shape} and {truths.shape}"
        )
    if predictions.size == 0:
        raise ValueError("cannot evaluate an empty prediction set")
    if predictions.min() < 0 or truths.min() < 0:
        raise ValueError("labels must be non-negative")
    seen = int(max(predictions.max(), truths.max())) + 1
    if num_labels is None:
        num_labels = seen
    elif seen > num_labels:
        raise ValueError(f"label {seen - 1} out of range for {num_labels} classes")

    confusion = np.zeros((num_labels, num_labels), dtype=np.int64)
    np.add.at(confusion, (truths, predictions), 1)
    class_counts = confusion.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        per_class = np.diag(confusion) / class_counts
    return EvalReport(
        accuracy=float(np.trace(confusion) / confusion.sum()),
        per_class_accuracy=per_class,
        confusion=confusion,
        count=int(predictions.size),
    )


def aggregate_seeds(reports: Sequence[EvalReport]) -> SeedSummary:
    """Arithmetic mean and population std over the runs' accuracies."""
    if len(reports) == 0:
        raise ValueError("need at least one report to aggregate")
    accuracies = tuple(float(r.accuracy) for r in reports)
    return SeedSummary(
        mean=float(np.mean(accuracies)),
        std=float(np.std(accuracies)),
        count=len(accuracies),
        accuracies=accuracies,
    )

"""Verbalizer aggregation and feature fusion.

A verbalizer maps each label to a set of words; mask-position word
probabilities are aggregated into a per-label distribution, and the final
per-example representation is the L2-normalized hidden vector concatenated
with that distribution.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from clda.exceptions import FeatureFormatError
from clda.feature_store import FeatureDataset


@dataclass(frozen=True)
class Verbalizer:
    """Per-label word sets. Words are opaque strings; no tokenization here."""

    label_words: list[list[str]]

    def __post_init__(self):
        if not self.label_words:
            raise ValueError("verbalizer has no labels")
        seen: set[str] = set()
        for y, words in enumerate(self.label_words):
            if not words:
                raise ValueError(f"label {y} has no verbalizer words")
            for w in words:
                if w in seen:
                    raise ValueError(f"verbalizer word {w!r} appears under multiple labels")
                seen.add(w)

    @property
    def num_labels(self) -> int:
        return len(self.label_words)

    def all_words(self) -> list[str]:
        return [w for words in self.label_words for w in words]


def load_verbalizer(path: str | Path, label_names: Sequence[str]) -> Verbalizer:
    """Load a JSON map of label name to word list, ordered by `label_names`."""
    with open(path, encoding="utf-8") as f:
        raw = json.load(f)
    if not isinstance(raw, dict):
        raise FeatureFormatError("verbalizer file must be a JSON object")
    missing = [name for name in label_names if name not in raw]
    if missing:
        raise FeatureFormatError(f"verbalizer file missing labels: {missing}")
    extra = [name for name in raw if name not in set(label_names)]
    if extra:
        raise FeatureFormatError(f"verbalizer file has unknown labels: {extra}")
    return Verbalizer([list(raw[name]) for name in label_names])


@dataclass(frozen=True)
class FusedVector:
    """Final representation: unit-norm hidden part followed by a simplex."""

    values: np.ndarray
    hidden_dim: int

    def hidden_part(self) -> np.ndarray:
        return self.values[: self.hidden_dim]

    def verb_part(self) -> np.ndarray:
        return self.values[self.hidden_dim :]


def verbalizer_label_distribution(
    word_probs: Mapping[str, float], verbalizer: Verbalizer
) -> np.ndarray:
    """Aggregate word probabilities into a label distribution.

    Entry y is the mass of label y's words divided by the total mass over
    all verbalizer words. Scale-invariant in the input probabilities.
    """
    sums = np.zeros(verbalizer.num_labels, dtype=np.float64)
    for y, words in enumerate(verbalizer.label_words):
        for w in words:
            if w not in word_probs:
                raise KeyError(f"verbalizer word {w!r} missing from word probabilities")
            p = float(word_probs[w])
            if p < 0 or not np.isfinite(p):
                raise ValueError(f"invalid probability {p!r} for word {w!r}")
            sums[y] += p
    total = sums.sum()
    if total <= 0.0:
        raise ValueError("all verbalizer words have zero probability mass")
    return sums / total


def pseudo_label(dist: np.ndarray) -> int:
    """Argmax of a label distribution; ties break to the lowest index."""
    dist = np.asarray(dist)
    if dist.ndim != 1 or dist.size == 0:
        raise ValueError("distribution must be a non-empty vector")
    return int(np.argmax(dist))


def l2_normalize(v: np.ndarray) -> np.ndarray:
    """Scale to unit Euclidean norm; the zero vector maps to itself."""
    v = np.asarray(v, dtype=np.float64)
    if not np.isfinite(v).all():
        raise ValueError("non-finite input to l2_normalize")
    norm = np.linalg.norm(v)
    if norm == 0.0:
        return v.copy()
    return v / norm


def fuse(h_last: np.ndarray, h_verb: np.ndarray) -> FusedVector:
    """Concatenate the normalized hidden vector with the label distribution."""
    h_last = np.asarray(h_last, dtype=np.float64)
    h_verb = np.asarray(h_verb, dtype=np.float64)
    if h_last.ndim != 1 or h_verb.ndim != 1:
        raise ValueError("fuse expects 1-D inputs")
    values = np.concatenate([l2_normalize(h_last), h_verb])
    return FusedVector(values=values, hidden_dim=h_last.shape[0])


def fused_matrix(dataset: FeatureDataset) -> np.ndarray:
    """Fused representations for a whole dataset, one row per record.

    Row i matches fuse(record_i.h_last, record_i.h_verb).values up to
    float rounding; computed vectorized at float64.
    """
    H = dataset.h_last_matrix().astype(np.float64)
    V = dataset.h_verb_matrix().astype(np.float64)
    norms = np.linalg.norm(H, axis=1, keepdims=True)
    # zero rows stay zero rather than dividing by zero
    safe = np.where(norms == 0.0, 1.0, norms)
    return np.hstack([H / safe, V])

"""Synthetic Gaussian-mixture feature sets with controllable label noise.

The generator mimics what an extractor would produce for a well-behaved
corpus: one Gaussian blob per class in hidden space (class directions
mutually orthogonal), a verbalizer distribution peaked at the pseudo-label
with Dirichlet jitter, and true labels embedded for evaluation. Label
noise comes in two flavors: uniform corruption (each corrupted record gets
a random wrong label) and a systematic label map (every record of class c
is relabeled map[c]), the latter modeling verbalizer confusion that
clustering alone cannot undo.
"""

from __future__ import annotations

from typing import Mapping

import numpy as np

from clda.feature_store import FeatureDataset, make_record


def make_mixture_dataset(
    n: int,
    num_labels: int,
    hidden_dim: int,
    seed: int,
    corruption: float = 0.0,
    label_map: Mapping[int, int] | None = None,
    separation: float = 6.0,
    noise: float = 1.0,
    verb_strength: tuple[float, float] = (0.3, 0.9),
    wrong_strength: tuple[float, float] = (0.05, 0.25),
    label_names: list[str] | None = None,
) -> tuple[FeatureDataset, np.ndarray]:
    """Build a labeled mixture; returns (dataset, true_labels).

    Every class is guaranteed at least one record. corruption is the exact
    fraction (rounded down) of records whose pseudo-label is flipped to a
    uniformly random wrong class; label_map is applied to all records
    first. true_label is set on every record.

    Uniformly corrupted records get a weak verbalizer peak (wrong labels
    come from ambiguous verbalizer readings, so their h_verb sits near the
    simplex center), while label_map confusion keeps full verb_strength:
    it models a verbalizer that is confidently, systematically wrong.
    """
    if num_labels < 2:
        raise ValueError("need at least two classes")
    if hidden_dim < num_labels:
        raise ValueError("hidden_dim must be at least num_labels")
    if n < num_labels:
        raise ValueError("need at least one record per class")
    if not 0 <= corruption < 1:
        raise ValueError("corruption must be in [0, 1)")
    for lo, hi in (verb_strength, wrong_strength):
        if not 0 < lo <= hi < 1:
            raise ValueError("strength bounds must satisfy 0 < lo <= hi < 1")

    rng = np.random.default_rng(seed)

    # Orthonormal class directions keep pairwise mean distances equal.
    q, _ = np.linalg.qr(rng.normal(size=(hidden_dim, hidden_dim)))
    means = q[:num_labels] * separation

    true = np.concatenate(
        [np.arange(num_labels), rng.integers(0, num_labels, size=n - num_labels)]
    )
    true = true[rng.permutation(n)].astype(np.int64)

    h_last = means[true] + rng.normal(size=(n, hidden_dim)) * noise

    pseudo = true.copy()
    if label_map is not None:
        lut = np.arange(num_labels)
        for src, dst in label_map.items():
            if not (0 <= src < num_labels and 0 <= dst < num_labels):
                raise ValueError(f"label map entry {src} -> {dst} out of range")
            lut[src] = dst
        pseudo = lut[pseudo]
    corrupted = np.zeros(n, dtype=bool)
    n_corrupt = int(corruption * n)
    if n_corrupt:
        idx = rng.permutation(n)[:n_corrupt]
        offsets = rng.integers(1, num_labels, size=n_corrupt)
        pseudo[idx] = (pseudo[idx] + offsets) % num_labels
        corrupted[idx] = True

    strength = rng.uniform(verb_strength[0], verb_strength[1], size=n)
    weak = rng.uniform(wrong_strength[0], wrong_strength[1], size=n)
    strength = np.where(corrupted, weak, strength)
    jitter = rng.dirichlet(np.ones(num_labels), size=n)
    h_verb = strength[:, None] * np.eye(num_labels)[pseudo]
    h_verb += (1.0 - strength)[:, None] * jitter

    if label_names is None:
        label_names = [f"class_{i}" for i in range(num_labels)]
    records = [
        make_record(
            id=i,
            h_last=h_last[i],
            h_verb=h_verb[i],
            pseudo_label=int(pseudo[i]),
            true_label=int(true[i]),
        )
        for i in range(n)
    ]
    dataset = FeatureDataset(
        records=records,
        num_labels=num_labels,
        hidden_dim=hidden_dim,
        label_names=list(label_names),
    )
    return dataset, true


def confusion_map(num_labels: int, num_correct: int) -> dict[int, int]:
    """Cyclic relabeling of all classes past num_correct.

    Classes [0, num_correct) keep their labels; the rest shift by one
    within their block, so pseudo-label accuracy on balanced data is about
    num_correct / num_labels and the confusion is self-consistent (every
    corrupted class maps to a distinct wrong class).
    """
    if not 0 <= num_correct <= num_labels:
        raise ValueError("num_correct must be in [0, num_labels]")
    wrong = list(range(num_correct, num_labels))
    if len(wrong) == 1:
        raise ValueError("cannot derange a single class; lower num_correct")
    return {c: wrong[(i + 1) % len(wrong)] for i, c in enumerate(wrong)}

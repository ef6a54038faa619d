"""Shared builders for hand-sized datasets used across the test modules."""

import numpy as np

from clda.feature_store import FeatureDataset, make_record


def dataset_from_arrays(
    h_last,
    h_verb,
    pseudo,
    true=None,
    ids=None,
    label_names=None,
    num_labels=None,
):
    h_last = np.asarray(h_last, dtype=np.float64)
    h_verb = np.asarray(h_verb, dtype=np.float64)
    n = h_last.shape[0]
    if num_labels is None:
        num_labels = h_verb.shape[1]
    if ids is None:
        ids = range(n)
    if label_names is None:
        label_names = [f"class_{i}" for i in range(num_labels)]
    records = [
        make_record(
            id=rid,
            h_last=h_last[i],
            h_verb=h_verb[i],
            pseudo_label=int(pseudo[i]),
            true_label=None if true is None else int(true[i]),
        )
        for i, rid in enumerate(ids)
    ]
    return FeatureDataset(
        records=records,
        num_labels=num_labels,
        hidden_dim=h_last.shape[1],
        label_names=list(label_names),
    )


def random_dataset(rng, n, num_labels, hidden_dim, with_true=False):
    """Unstructured but valid dataset; h_verb rows are random simplices."""
    h_last = rng.normal(size=(n, hidden_dim))
    h_verb = rng.dirichlet(np.ones(num_labels), size=n)
    pseudo = rng.integers(0, num_labels, size=n)
    true = rng.integers(0, num_labels, size=n) if with_true else None
    return dataset_from_arrays(h_last, h_verb, pseudo, true=true)


def peaked_verb(pseudo, num_labels, strength=0.8):
    """Simplex rows peaked at each pseudo label, uniform elsewhere."""
    pseudo = np.asarray(pseudo)
    base = np.full((pseudo.size, num_labels), (1.0 - strength) / num_labels)
    base[np.arange(pseudo.size), pseudo] += strength
    return base

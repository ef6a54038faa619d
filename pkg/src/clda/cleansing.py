"""Cluster-entropy data cleansing.

Each cluster gets a pseudo-label distribution, a normalized entropy, and
an entropy weight (certainty share). Clusters above the EW threshold are
kept; within them, records disagreeing with the cluster majority are
dropped. What survives is the certain dataset the classifier trains on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from clda.exceptions import CleansingError
from clda.feature_store import FeatureDataset
from clda.kmeans import ClusterModel


@dataclass(frozen=True)
class ClusterStats:
    """Per-cluster label distributions, entropies, weights, and majorities."""

    label_dist: np.ndarray   # (K, |Y|) rows sum to 1
    norm_ent: np.ndarray     # (K,) in [0, 1]
    ew: np.ndarray           # (K,) nonnegative, sums to 1
    majority: np.ndarray     # (K,) argmax label per cluster
    sizes: np.ndarray        # (K,) member counts

    @property
    def n_clusters(self) -> int:
        return self.norm_ent.shape[0]


def cluster_label_distribution(
    assignments: np.ndarray, pseudo_labels: np.ndarray, cluster: int, num_labels: int
) -> np.ndarray:
    """Pseudo-label distribution of one cluster: per-label count over size."""
    members = pseudo_labels[assignments == cluster]
    if members.size == 0:
        raise CleansingError(f"cluster {cluster} is empty")
    counts = np.bincount(members, minlength=num_labels).astype(np.float64)
    return counts / members.size


def _entropy_nats(dist: np.ndarray) -> np.ndarray:
    """Row-wise Shannon entropy in nats, with 0*log(0) = 0."""
    dist = np.atleast_2d(np.asarray(dist, dtype=np.float64))
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(dist > 0.0, dist * np.log(dist), 0.0)
    return -terms.sum(axis=1)


def normalized_entropy(dist: np.ndarray, num_labels: int) -> float:
    """Shannon entropy over the label space divided by its maximum.

    The denominator is the entropy of the uniform distribution computed
    through the identical code path (mathematically log|Y|), which makes
    one-hot map to exactly 0.0 and uniform to exactly 1.0; the result is
    clipped into [0, 1].
    """
    if num_labels < 2:
        raise ValueError("num_labels must be at least 2")
    dist = np.asarray(dist, dtype=np.float64)
    if dist.shape != (num_labels,):
        raise ValueError(f"distribution length {dist.shape} does not match |Y|={num_labels}")
    h = _entropy_nats(dist)[0]
    h_max = _entropy_nats(np.full((1, num_labels), 1.0 / num_labels))[0]
    return float(np.clip(h / h_max, 0.0, 1.0))


def entropy_weights(norm_ents: np.ndarray) -> np.ndarray:
    """Certainty shares: (1 - NormEnt_i) normalized over all clusters."""
    norm_ents = np.asarray(norm_ents, dtype=np.float64)
    if ((norm_ents < 0) | (norm_ents > 1)).any():
        raise ValueError("normalized entropies must lie in [0, 1]")
    certainty = 1.0 - norm_ents
    total = certainty.sum()
    if total <= 0.0:
        raise CleansingError("no certain clusters: every cluster is maximally entropic")
    return certainty / total


def select_clean_clusters(ew: np.ndarray, tau: float) -> np.ndarray:
    """Indices of clusters whose entropy weight reaches the threshold."""
    ew = np.asarray(ew, dtype=np.float64)
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    selected = np.flatnonzero(ew >= tau)
    if selected.size == 0:
        raise CleansingError(f"threshold too strong: tau={tau} removes every cluster")
    return selected


def compute_cluster_stats(
    assignments: np.ndarray, pseudo_labels: np.ndarray, k: int, num_labels: int
) -> ClusterStats:
    """Vectorized per-cluster statistics over all K clusters."""
    counts = np.zeros((k, num_labels), dtype=np.float64)
    np.add.at(counts, (assignments, pseudo_labels), 1.0)
    sizes = counts.sum(axis=1)
    if (sizes == 0).any():
        raise CleansingError(f"cluster {int(np.flatnonzero(sizes == 0)[0])} is empty")
    label_dist = counts / sizes[:, None]
    h = _entropy_nats(label_dist)
    h_max = _entropy_nats(np.full((1, num_labels), 1.0 / num_labels))[0]
    norm_ent = np.clip(h / h_max, 0.0, 1.0)
    ew = entropy_weights(norm_ent)
    majority = np.argmax(label_dist, axis=1)
    return ClusterStats(
        label_dist=label_dist,
        norm_ent=norm_ent,
        ew=ew,
        majority=majority,
        sizes=sizes.astype(np.int64),
    )


def clean_record_mask(
    assignments: np.ndarray,
    pseudo_labels: np.ndarray,
    selected: np.ndarray,
    stats: ClusterStats,
) -> np.ndarray:
    """Boolean mask of records surviving both filters.

    A record survives iff its cluster was selected and its pseudo-label
    matches that cluster's majority.
    """
    in_selected = np.isin(assignments, selected)
    agrees = pseudo_labels == stats.majority[assignments]
    return in_selected & agrees


def majority_filter(
    dataset: FeatureDataset,
    assignments: np.ndarray,
    selected: np.ndarray,
    stats: ClusterStats,
) -> FeatureDataset:
    """Keep only majority-conformant records of the selected clusters."""
    if np.asarray(selected).size == 0:
        raise CleansingError("no clean clusters selected")
    mask = clean_record_mask(assignments, dataset.pseudo_labels(), np.asarray(selected), stats)
    if not mask.any():
        raise CleansingError("certain dataset is empty after majority filtering")
    return dataset.subset(np.flatnonzero(mask))


def cleanse(
    dataset: FeatureDataset, cluster_model: ClusterModel, tau: float
) -> tuple[FeatureDataset, ClusterStats]:
    """Full cleansing pass: stats, EW thresholding, majority filtering."""
    stats = compute_cluster_stats(
        cluster_model.assignments,
        dataset.pseudo_labels(),
        cluster_model.n_clusters,
        dataset.num_labels,
    )
    selected = select_clean_clusters(stats.ew, tau)
    clean = majority_filter(dataset, cluster_model.assignments, selected, stats)
    return clean, stats

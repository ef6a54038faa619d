"""Query selection and label propagation for human-in-the-loop refinement.

One candidate per cluster (the member nearest its centroid), a budget of
n_shot * num_labels queries spread over clusters chosen by strategy, and
cluster-wide propagation of the answered labels before retraining.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from clda import cleansing, kmeans, lda, trainer
from clda.feature_store import FeatureDataset, merge_true_labels
from clda.representation import fused_matrix

STRATEGIES = ("largest", "highest-entropy")


@dataclass(frozen=True)
class Query:
    record_id: int
    cluster: int
    distance: float


@dataclass(frozen=True)
class QuerySet:
    entries: tuple[Query, ...]

    def __len__(self) -> int:
        return len(self.entries)

    def ids(self) -> frozenset[int]:
        return frozenset(q.record_id for q in self.entries)

    def cluster_of(self, record_id: int) -> int:
        for q in self.entries:
            if q.record_id == record_id:
                return q.cluster
        raise KeyError(record_id)


def _cluster_order(
    cluster_model: kmeans.ClusterModel,
    dataset: FeatureDataset,
    strategy: str,
) -> np.ndarray:
    """Non-empty clusters ranked by query priority, ties broken by index."""
    sizes = cluster_model.cluster_sizes()
    non_empty = np.flatnonzero(sizes > 0)
    if strategy == "largest":
        key = np.lexsort((non_empty, -sizes[non_empty]))
        return non_empty[key]
    if strategy == "highest-entropy":
        stats = cleansing.compute_cluster_stats(
            cluster_model.assignments,
            dataset.pseudo_labels(),
            cluster_model.n_clusters,
            dataset.num_labels,
        )
        ent = stats.norm_ent[non_empty]
        key = np.lexsort((non_empty, -sizes[non_empty], -ent))
        return non_empty[key]
    raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")


def select_queries(
    cluster_model: kmeans.ClusterModel,
    dataset: FeatureDataset,
    n_shot: int,
    strategy: str = "largest",
) -> QuerySet:
    """Pick the centroid-nearest member of each of n_shot * |Y| clusters.

    "largest" spends the budget on the biggest clusters (maximizing how
    many records an answer can reach); "highest-entropy" targets the most
    label-confused clusters instead. n_shot = 0 yields an empty set.
    """
    if n_shot < 0:
        raise ValueError("n_shot must be non-negative")
    budget = n_shot * dataset.num_labels
    if budget == 0:
        return QuerySet(entries=())

    order = _cluster_order(cluster_model, dataset, strategy)
    if budget > order.size:
        raise ValueError(
            f"budget {budget} exceeds non-empty cluster count {order.size}"
        )

    points = fused_matrix(dataset)
    ids = dataset.ids()
    assignments = cluster_model.assignments
    entries = []
    for cluster in order[:budget]:
        members = np.flatnonzero(assignments == cluster)
        d = np.linalg.norm(
            points[members] - cluster_model.centroids[cluster], axis=1
        )
        # Nearest member; equidistant members resolve to the lowest id.
        best = np.lexsort((ids[members], d))[0]
        entries.append(
            Query(
                record_id=int(ids[members[best]]),
                cluster=int(cluster),
                distance=float(d[best]),
            )
        )
    return QuerySet(entries=tuple(entries))


def propagate_labels(
    dataset: FeatureDataset,
    cluster_model: kmeans.ClusterModel,
    answers: Mapping[int, int],
    queries: QuerySet,
) -> FeatureDataset:
    """Spread each answered label over the whole cluster it was drawn from.

    Every record in an answered query's cluster has its pseudo_label
    overwritten with the answer; the queried record itself additionally
    gets true_label set. Unanswered clusters are untouched.
    """
    if not answers:
        return dataset
    queried = queries.ids()
    cluster_label: dict[int, int] = {}
    for record_id, label in answers.items():
        if record_id not in queried:
            raise ValueError(f"answer for unqueried id {record_id}")
        if not 0 <= label < dataset.num_labels:
            raise ValueError(
                f"label out of range in answer for id {record_id}"
            )
        cluster_label[queries.cluster_of(record_id)] = int(label)

    new_labels = dataset.pseudo_labels().copy()
    for cluster, label in cluster_label.items():
        new_labels[cluster_model.assignments == cluster] = label
    propagated = dataset.with_pseudo_labels(new_labels)
    return merge_true_labels(propagated, {int(k): int(v) for k, v in answers.items()})


def _selection_cluster_model(
    dataset: FeatureDataset, config: trainer.TrainConfig
) -> kmeans.ClusterModel:
    """Clustering used for query selection; reproducible from the seed alone."""
    k = (
        config.cluster_count
        if config.cluster_count is not None
        else kmeans.default_cluster_count(dataset.num_labels, len(dataset.records))
    )
    seed = int(np.random.SeedSequence([config.seed, 0]).generate_state(1)[0])
    return kmeans.kmeans_fit(fused_matrix(dataset), k, seed=seed, ids=dataset.ids())


def select_queries_for_config(
    dataset: FeatureDataset,
    config: trainer.TrainConfig,
    n_shot: int,
    strategy: str = "largest",
) -> tuple[QuerySet, kmeans.ClusterModel]:
    """Query selection against the config-determined clustering."""
    cluster_model = _selection_cluster_model(dataset, config)
    return select_queries(cluster_model, dataset, n_shot, strategy), cluster_model


def al_retrain(
    dataset: FeatureDataset,
    config: trainer.TrainConfig,
    answers: Mapping[int, int],
    n_shot: int,
    strategy: str = "largest",
) -> tuple[lda.LdaModel, trainer.TrainHistory]:
    """Propagate answered labels, then retrain with those clusters trusted.

    The selection clustering is recomputed from config.seed, so answers
    gathered against a query file from the same config line up exactly.
    With no answers this is identical to trainer.run.
    """
    if not answers:
        return trainer.run(dataset, config)
    queries, cluster_model = select_queries_for_config(
        dataset, config, n_shot, strategy
    )
    propagated = propagate_labels(dataset, cluster_model, answers, queries)

    answered_clusters = {queries.cluster_of(rid) for rid in answers}
    member_mask = np.isin(
        cluster_model.assignments, np.fromiter(answered_clusters, dtype=np.int64)
    )
    trusted = frozenset(int(i) for i in dataset.ids()[member_mask])
    return trainer.run(propagated, config, trusted_ids=trusted)

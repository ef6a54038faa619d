"""Recursive training loop: cluster, cleanse, fit, relabel, repeat.

Each epoch re-clusters the (fixed) fused vectors, filters the current
pseudo-labels down to a certain subset, fits the discriminant on that
subset, folds the fit into a running average of all epoch fits, and
relabels every record with the averaged model. The loop exits when the
fraction of relabeled records drops below delta.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from clda import cleansing, kmeans, lda
from clda.exceptions import CleansingError, DegenerateFitError
from clda.feature_store import FeatureDataset, validate_dataset
from clda.representation import fused_matrix

DEFAULT_DELTA = 0.005
DEFAULT_MAX_EPOCHS = 20


@dataclass(frozen=True)
class TrainConfig:
    """Knobs for one training run.

    cluster_count, tau, and eps accept None for their data-dependent
    defaults (size-based cluster count, 1/(2K), trace-scaled shrinkage).
    """

    seed: int = 13
    cluster_count: int | None = None
    tau: float | None = None
    delta: float = DEFAULT_DELTA
    max_epochs: int = DEFAULT_MAX_EPOCHS
    eps: float | None = None

    def __post_init__(self) -> None:
        if self.cluster_count is not None and self.cluster_count < 1:
            raise ValueError("cluster_count must be at least 1")
        if self.tau is not None and self.tau < 0:
            raise ValueError("tau must be non-negative")
        # delta = 1.0 is allowed as the vacuous threshold: one epoch, then exit.
        if not 0 < self.delta <= 1:
            raise ValueError("delta must be in (0, 1]")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be at least 1")
        if self.eps is not None and self.eps <= 0:
            raise ValueError("eps must be positive")


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    clean_size: int
    kept_fraction: float
    selected_cluster_count: int
    label_change_ratio: float


@dataclass(frozen=True)
class TrainHistory:
    """One EpochStats per executed epoch, plus the final relabeling."""

    epochs: tuple[EpochStats, ...]
    converged: bool
    final_labels: np.ndarray

    @property
    def num_epochs(self) -> int:
        return len(self.epochs)


def label_change_ratio(old_labels: np.ndarray, new_labels: np.ndarray) -> float:
    """Fraction of positions whose label differs between the two vectors."""
    old_labels = np.asarray(old_labels)
    new_labels = np.asarray(new_labels)
    if old_labels.shape != new_labels.shape:
        raise ValueError(
            f"length mismatch: {old_labels.shape} vs {new_labels.shape}"
        )
    if old_labels.size == 0:
        raise ValueError("cannot compare empty label vectors")
    return float(np.mean(old_labels != new_labels))


def resolve_tau(tau: float | None, cluster_count: int) -> float:
    """Half the mean entropy weight unless a threshold was given."""
    if tau is not None:
        return float(tau)
    return 1.0 / (2 * cluster_count)


def _epoch_seed(seed: int, epoch: int) -> int:
    # Distinct, reproducible stream per epoch; epoch 0 is reserved for
    # active-learning query selection.
    return int(np.random.SeedSequence([seed, epoch]).generate_state(1)[0])


def run(
    dataset: FeatureDataset,
    config: TrainConfig,
    trusted_ids: frozenset[int] = frozenset(),
    epoch_callback=None,
) -> tuple[lda.LdaModel, TrainHistory]:
    """Train until the relabeling stabilizes or max_epochs is hit.

    Records whose ids appear in trusted_ids are always retained for
    fitting even when cleansing would drop them (their current labels are
    taken as authoritative); relabeling still updates them like any other
    record. epoch_callback, if given, is called as
    callback(epoch, model, stats) after each completed epoch.

    Returns the final averaged model and the per-epoch history; hitting
    max_epochs without stabilizing is reported via history.converged,
    not as an error.
    """
    validate_dataset(dataset)
    n = len(dataset.records)
    num_labels = dataset.num_labels

    initial_labels = dataset.pseudo_labels()
    initial_counts = np.bincount(initial_labels, minlength=num_labels)
    if (initial_counts == 0).any():
        missing = int(np.flatnonzero(initial_counts == 0)[0])
        raise ValueError(f"class {missing} has no pseudo-labeled records")

    ids = dataset.ids()
    if trusted_ids:
        unknown = set(trusted_ids) - set(ids.tolist())
        if unknown:
            raise ValueError(f"trusted id {min(unknown)} not in dataset")
    trusted_mask = (
        np.isin(ids, np.fromiter(trusted_ids, dtype=np.int64))
        if trusted_ids
        else np.zeros(n, dtype=bool)
    )

    points = fused_matrix(dataset)
    k = (
        config.cluster_count
        if config.cluster_count is not None
        else kmeans.default_cluster_count(num_labels, n)
    )
    tau = resolve_tau(config.tau, k)

    current = dataset
    prev_labels = initial_labels
    model: lda.LdaModel | None = None
    history: list[EpochStats] = []
    converged = False

    for epoch in range(1, config.max_epochs + 1):
        cluster_model = kmeans.kmeans_fit(
            points, k, seed=_epoch_seed(config.seed, epoch), ids=ids
        )
        try:
            clean, stats = cleansing.cleanse(current, cluster_model, tau)
        except CleansingError as exc:
            raise CleansingError(f"epoch {epoch}: {exc}") from exc
        selected = cleansing.select_clean_clusters(stats.ew, tau)

        fit_mask = np.isin(ids, clean.ids()) | trusted_mask
        fit_idx = np.flatnonzero(fit_mask)
        current_labels = current.pseudo_labels()
        fit_labels = current_labels[fit_idx]

        fit_counts = np.bincount(fit_labels, minlength=num_labels)
        if epoch == 1 and (fit_counts == 0).any():
            vanished = int(np.flatnonzero(fit_counts == 0)[0])
            raise DegenerateFitError(
                f"class {vanished} vanished from the cleansed data on epoch 1"
            )

        epoch_fit = lda.fit_arrays(
            points[fit_idx], fit_labels, num_labels, eps=config.eps, prev=model
        )
        # Running average of epoch fits: weight 1/epoch on the fresh fit,
        # which at epoch 1 reduces to the fit itself.
        model = lda.moving_average_update(
            model if model is not None else epoch_fit, epoch_fit, epoch
        )

        new_labels = lda.predict_batch(points, model)
        ratio = label_change_ratio(prev_labels, new_labels)
        entry = EpochStats(
            epoch=epoch,
            clean_size=int(fit_idx.size),
            kept_fraction=float(fit_idx.size / n),
            selected_cluster_count=int(selected.size),
            label_change_ratio=ratio,
        )
        history.append(entry)
        if epoch_callback is not None:
            epoch_callback(epoch, model, entry)

        current = current.with_pseudo_labels(new_labels)
        prev_labels = new_labels
        if ratio < config.delta:
            converged = True
            break

    return model, TrainHistory(
        epochs=tuple(history), converged=converged, final_labels=prev_labels
    )

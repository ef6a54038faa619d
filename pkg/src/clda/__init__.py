"""Weakly-supervised text classification over frozen LM features.

The pipeline: verbalizer pseudo-labels and pooled hidden states come in
through a binary feature file, get fused into a single representation,
cleansed via KMeans clustering and per-cluster entropy weights, and a
tied-covariance Gaussian discriminant classifier is fit and recursively
refined on the surviving subset. An active-learning loop handles label
spaces too fine-grained for verbalizers.
"""

from clda.exceptions import (
    CleansingError,
    DegenerateFitError,
    FeatureFormatError,
)
from clda.feature_store import (
    FeatureDataset,
    FeatureRecord,
    merge_true_labels,
    read_answer_file,
    read_feature_file,
    write_feature_file,
)
from clda.representation import (
    FusedVector,
    Verbalizer,
    fuse,
    fused_matrix,
    l2_normalize,
    pseudo_label,
    verbalizer_label_distribution,
)
from clda.kmeans import ClusterModel, assign, default_cluster_count, kmeans_fit
from clda.cleansing import (
    ClusterStats,
    cleanse,
    cluster_label_distribution,
    entropy_weights,
    majority_filter,
    normalized_entropy,
    select_clean_clusters,
)
from clda.lda import (
    LdaModel,
    fit,
    mahalanobis,
    moving_average_update,
    posterior,
    predict,
    read_model_file,
    write_model_file,
)
from clda.trainer import TrainConfig, TrainHistory, label_change_ratio, run
from clda.active_learning import (
    QuerySet,
    al_retrain,
    propagate_labels,
    select_queries,
)
from clda.metrics import DEFAULT_SEEDS, EvalReport, aggregate_seeds, evaluate

__version__ = "0.1.0"

"""Tied-covariance Gaussian discriminant classifier.

MLE fit (per-class means, one shared covariance), Mahalanobis-distance
inference through a cached Cholesky factor, and a moving-average update
that blends successive fits during recursive training. Priors are uniform
and therefore drop out of every decision rule.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import LinAlgError, cholesky, solve_triangular

from clda.exceptions import DegenerateFitError, FeatureFormatError
from clda.feature_store import FeatureDataset
from clda.representation import fused_matrix

MODEL_MAGIC = b"CLDA"
MODEL_VERSION = 1

EPS_SCALE = 1e-6
EPS_FLOOR = 1e-10


@dataclass(frozen=True)
class LdaModel:
    """Fitted classifier state. Immutable; safe for concurrent reads."""

    means: np.ndarray             # (|Y|, D)
    covariance: np.ndarray        # (D, D), symmetric
    precision_factor: np.ndarray  # lower Cholesky factor of covariance + eps*I
    shrinkage_eps: float
    timestamp: int
    class_present: np.ndarray     # (|Y|,) bool
    eps_request: float | None = None  # None means the auto trace rule

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def num_labels(self) -> int:
        return self.means.shape[0]


def resolve_eps(covariance: np.ndarray, eps: float | None) -> float:
    """Concrete shrinkage: requested value, or the trace-scaled default.

    The default keeps the regularization proportional to the data scale;
    the floor rescues the all-zero covariance of one-sample-per-class fits.
    """
    if eps is not None:
        if eps <= 0:
            raise ValueError("shrinkage eps must be positive")
        return float(eps)
    dim = covariance.shape[0]
    return max(EPS_FLOOR, EPS_SCALE * float(np.trace(covariance)) / dim)


def _factorize(covariance: np.ndarray, eps: float) -> np.ndarray:
    shrunk = covariance + eps * np.eye(covariance.shape[0])
    try:
        return cholesky(shrunk, lower=True)
    except LinAlgError as exc:
        raise ValueError(
            f"covariance + {eps} * I is not positive definite; increase eps"
        ) from exc


def fit_arrays(
    x: np.ndarray,
    labels: np.ndarray,
    num_labels: int,
    eps: float | None = None,
    prev: LdaModel | None = None,
) -> LdaModel:
    """MLE fit on fused vectors with integer labels.

    Covariance uses the MLE denominator (the sample count, not n - |Y|).
    Classes without samples are flagged absent; their mean slots stay zero
    until a moving-average update inherits values from a prior model. A
    single-class fit with no prior model is degenerate and refused.
    """
    x = np.asarray(x, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if x.ndim != 2 or labels.shape != (x.shape[0],):
        raise ValueError("expected x of shape (n, dim) and one label per row")
    if x.shape[0] == 0:
        raise ValueError("cannot fit on an empty dataset")
    if labels.min() < 0 or labels.max() >= num_labels:
        raise ValueError("label out of range")

    counts = np.bincount(labels, minlength=num_labels)
    class_present = counts > 0
    if int(class_present.sum()) == 1 and prev is None:
        raise DegenerateFitError(
            "degenerate fit: all records share one class and no prior model to inherit from"
        )

    dim = x.shape[1]
    means = np.zeros((num_labels, dim), dtype=np.float64)
    sums = np.zeros((num_labels, dim), dtype=np.float64)
    np.add.at(sums, labels, x)
    means[class_present] = sums[class_present] / counts[class_present, None]

    centered = x - means[labels]
    covariance = centered.T @ centered / x.shape[0]
    covariance = (covariance + covariance.T) * 0.5

    eps_resolved = resolve_eps(covariance, eps)
    return LdaModel(
        means=means,
        covariance=covariance,
        precision_factor=_factorize(covariance, eps_resolved),
        shrinkage_eps=eps_resolved,
        timestamp=1,
        class_present=class_present,
        eps_request=eps,
    )


def fit(
    clean: FeatureDataset, eps: float | None = None, prev: LdaModel | None = None
) -> LdaModel:
    """Fit on a (cleansed) dataset's fused representations and pseudo-labels."""
    return fit_arrays(
        fused_matrix(clean), clean.pseudo_labels(), clean.num_labels, eps=eps, prev=prev
    )


def mahalanobis_matrix(x: np.ndarray, model: LdaModel) -> np.ndarray:
    """Squared Mahalanobis distances, shape (n, |Y|); absent classes get +inf."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != model.dim:
        raise ValueError(f"dimension mismatch: x has {x.shape[1]}, model has {model.dim}")
    out = np.full((x.shape[0], model.num_labels), np.inf)
    for c in np.flatnonzero(model.class_present):
        z = solve_triangular(model.precision_factor, (x - model.means[c]).T, lower=True)
        out[:, c] = np.einsum("dn,dn->n", z, z)
    return out


def mahalanobis(x: np.ndarray, c: int, model: LdaModel) -> float:
    """Squared Mahalanobis distance of x to class c, via two triangular solves."""
    if not model.class_present[c]:
        raise ValueError(f"class {c} absent from model")
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.dim,):
        raise ValueError(f"dimension mismatch: x has shape {x.shape}, model dim {model.dim}")
    z = solve_triangular(model.precision_factor, x - model.means[c], lower=True)
    return float(z @ z)


def predict_batch(x: np.ndarray, model: LdaModel) -> np.ndarray:
    """Distance-minimizing class per row; ties break to the lowest index."""
    if not model.class_present.any():
        raise ValueError("model has no present classes")
    return np.argmin(mahalanobis_matrix(x, model), axis=1)


def predict(x: np.ndarray, model: LdaModel) -> int:
    return int(predict_batch(np.atleast_2d(x), model)[0])


def posterior_batch(x: np.ndarray, model: LdaModel) -> np.ndarray:
    """Class posteriors: softmax of -d/2 over present classes, 0 elsewhere."""
    d = mahalanobis_matrix(x, model)
    logits = -0.5 * d
    present = model.class_present
    shifted = logits[:, present] - logits[:, present].max(axis=1, keepdims=True)
    weights = np.exp(shifted)
    out = np.zeros_like(d)
    out[:, present] = weights / weights.sum(axis=1, keepdims=True)
    return out


def posterior(x: np.ndarray, model: LdaModel) -> np.ndarray:
    return posterior_batch(np.atleast_2d(x), model)[0]


def moving_average_update(prev: LdaModel, new_fit: LdaModel, t: int) -> LdaModel:
    """Blend two models with weights ((t-1)/t, 1/t) on (prev, new_fit).

    Classes present in only one input keep that input's values unchanged;
    the precision factor is recomputed on the blended covariance and the
    timestamp advances to t + 1. At t=1 the result equals new_fit.
    """
    if t < 1:
        raise ValueError("t must be at least 1")
    if prev.means.shape != new_fit.means.shape:
        raise ValueError(
            f"shape mismatch: prev means {prev.means.shape} vs new {new_fit.means.shape}"
        )
    w_prev = (t - 1) / t
    w_new = 1 / t

    means = w_prev * prev.means + w_new * new_fit.means
    only_prev = prev.class_present & ~new_fit.class_present
    only_new = new_fit.class_present & ~prev.class_present
    means[only_prev] = prev.means[only_prev]
    means[only_new] = new_fit.means[only_new]
    class_present = prev.class_present | new_fit.class_present

    covariance = w_prev * prev.covariance + w_new * new_fit.covariance
    eps_request = new_fit.eps_request
    eps_resolved = resolve_eps(covariance, eps_request)
    return LdaModel(
        means=means,
        covariance=covariance,
        precision_factor=_factorize(covariance, eps_resolved),
        shrinkage_eps=eps_resolved,
        timestamp=t + 1,
        class_present=class_present,
        eps_request=eps_request,
    )


def write_model_file(model: LdaModel, path: str | Path) -> None:
    """Serialize a model; round-trips exactly at 64-bit precision."""
    buf = bytearray()
    buf += MODEL_MAGIC
    buf += struct.pack(
        "<IIIQ", MODEL_VERSION, model.dim, model.num_labels, model.timestamp
    )
    buf += struct.pack("<d", model.shrinkage_eps)
    if model.eps_request is None:
        buf += struct.pack("<Bd", 0, 0.0)
    else:
        buf += struct.pack("<Bd", 1, model.eps_request)
    buf += model.class_present.astype("<u1").tobytes()
    buf += np.ascontiguousarray(model.means, dtype="<f8").tobytes()
    buf += np.ascontiguousarray(model.covariance, dtype="<f8").tobytes()
    Path(path).write_bytes(bytes(buf))


def read_model_file(path: str | Path) -> LdaModel:
    """Load a model and recompute its precision factor."""
    data = Path(path).read_bytes()
    if data[:4] != MODEL_MAGIC:
        raise FeatureFormatError(f"malformed model header: bad magic in {path}")
    off = 4
    version, dim, num_labels, timestamp = struct.unpack_from("<IIIQ", data, off)
    off += struct.calcsize("<IIIQ")
    if version != MODEL_VERSION:
        raise FeatureFormatError(f"unsupported model version {version}")
    (eps,) = struct.unpack_from("<d", data, off)
    off += 8
    req_flag, req_val = struct.unpack_from("<Bd", data, off)
    off += struct.calcsize("<Bd")
    expected = off + num_labels + 8 * num_labels * dim + 8 * dim * dim
    if len(data) != expected:
        raise FeatureFormatError(
            f"model file length {len(data)} does not match header (expected {expected})"
        )
    class_present = np.frombuffer(data, dtype="<u1", count=num_labels, offset=off) > 0
    off += num_labels
    means = np.frombuffer(data, dtype="<f8", count=num_labels * dim, offset=off)
    means = means.reshape(num_labels, dim).copy()
    off += 8 * num_labels * dim
    covariance = np.frombuffer(data, dtype="<f8", count=dim * dim, offset=off)
    covariance = covariance.reshape(dim, dim).copy()
    eps_request = float(req_val) if req_flag == 1 else None
    return LdaModel(
        means=means,
        covariance=covariance,
        precision_factor=_factorize(covariance, eps),
        shrinkage_eps=float(eps),
        timestamp=int(timestamp),
        class_present=class_present.copy(),
        eps_request=eps_request,
    )

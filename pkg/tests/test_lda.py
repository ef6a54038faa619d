import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from clda.exceptions import DegenerateFitError, FeatureFormatError
from clda.lda import (
    EPS_FLOOR,
    EPS_SCALE,
    LdaModel,
    fit,
    fit_arrays,
    mahalanobis,
    mahalanobis_matrix,
    moving_average_update,
    posterior,
    posterior_batch,
    predict,
    predict_batch,
    read_model_file,
    resolve_eps,
    write_model_file,
)
from clda.representation import fused_matrix
from helpers import dataset_from_arrays, peaked_verb


def two_class_toy():
    x = np.array([[0.0, 0.0], [0.0, 2.0], [4.0, 0.0], [4.0, 2.0]])
    labels = np.array([0, 0, 1, 1])
    return fit_arrays(x, labels, 2)


def identity_model(means):
    """Zero data covariance plus eps=1 gives exactly the identity metric."""
    means = np.asarray(means, dtype=np.float64)
    labels = np.arange(means.shape[0])
    return fit_arrays(means, labels, means.shape[0], eps=1.0)


def random_model(rng, n, num_labels, dim, eps=None):
    x = rng.normal(size=(n, dim))
    labels = rng.integers(0, num_labels, size=n)
    labels[:num_labels] = np.arange(num_labels)
    return fit_arrays(x, labels, num_labels, eps=eps), x


def test_fit_means_and_covariance_by_hand():
    model = two_class_toy()
    assert np.array_equal(model.means, [[0.0, 1.0], [4.0, 1.0]])
    assert np.array_equal(model.covariance, [[0.0, 0.0], [0.0, 1.0]])
    assert model.timestamp == 1
    assert model.class_present.all()


def test_fit_uses_mle_denominator():
    # variance over {0, 2} with divisor n is 1, with n - |Y| it would be 2
    model = two_class_toy()
    assert model.covariance[1, 1] == 1.0


def test_fit_one_point_per_class_hits_eps_floor():
    model = identity_model([[0.0, 0.0], [5.0, 5.0]])
    assert np.array_equal(model.covariance, np.zeros((2, 2)))
    assert model.shrinkage_eps == 1.0
    default = fit_arrays(
        np.array([[0.0, 0.0], [5.0, 5.0]]), np.array([0, 1]), 2
    )
    assert default.shrinkage_eps == EPS_FLOOR


def test_fit_recovers_moments_of_gaussian_sample():
    rng = np.random.default_rng(0)
    true_means = np.array([[0.0, 0.0, 0.0], [3.0, -1.0, 2.0]])
    cov = np.array([[2.0, 0.5, 0.0], [0.5, 1.0, 0.2], [0.0, 0.2, 1.5]])
    n = 500
    xs, ys = [], []
    for c in range(2):
        xs.append(rng.multivariate_normal(true_means[c], cov, size=n))
        ys.append(np.full(n, c))
    model = fit_arrays(np.vstack(xs), np.concatenate(ys), 2)
    se = np.sqrt(np.diag(cov) / n)
    assert (np.abs(model.means - true_means) < 4 * se).all()
    assert np.allclose(model.covariance, cov, atol=0.2)


def test_fit_rejects_bad_inputs():
    x = np.zeros((3, 2))
    with pytest.raises(ValueError, match="empty"):
        fit_arrays(np.zeros((0, 2)), np.zeros(0, dtype=int), 2)
    with pytest.raises(ValueError, match="label out of range"):
        fit_arrays(x, np.array([0, 1, 2]), 2)
    with pytest.raises(ValueError, match="one label per row"):
        fit_arrays(x, np.array([0, 1]), 2)


def test_fit_single_class_degenerate_without_prior():
    x = np.random.default_rng(1).normal(size=(10, 3))
    with pytest.raises(DegenerateFitError, match="one class"):
        fit_arrays(x, np.zeros(10, dtype=int), 2)


def test_fit_single_class_allowed_with_prior():
    rng = np.random.default_rng(2)
    prev, _ = random_model(rng, 30, 2, 3)
    x = rng.normal(size=(10, 3))
    model = fit_arrays(x, np.zeros(10, dtype=int), 2, prev=prev)
    assert model.class_present.tolist() == [True, False]
    assert np.array_equal(model.means[1], np.zeros(3))


def test_fit_wrapper_matches_fit_arrays():
    rng = np.random.default_rng(3)
    pseudo = [0, 1, 0, 1, 2, 2]
    ds = dataset_from_arrays(rng.normal(size=(6, 4)), peaked_verb(pseudo, 3), pseudo)
    via_ds = fit(ds)
    via_arrays = fit_arrays(fused_matrix(ds), np.array(pseudo), 3)
    assert np.array_equal(via_ds.means, via_arrays.means)
    assert np.array_equal(via_ds.covariance, via_arrays.covariance)


def test_resolve_eps_rules():
    cov = np.diag([2.0, 4.0])
    assert resolve_eps(cov, 0.5) == 0.5
    assert resolve_eps(cov, None) == EPS_SCALE * 3.0
    assert resolve_eps(np.zeros((4, 4)), None) == EPS_FLOOR
    with pytest.raises(ValueError, match="positive"):
        resolve_eps(cov, 0.0)


def test_indefinite_covariance_rejected_at_fit_time():
    # a negative explicit eps is caught, and an eps too small to repair an
    # indefinite blend raises the factorization error with the remedy in it
    from clda.lda import _factorize

    cov = np.array([[1.0, 0.0], [0.0, -5.0]])
    with pytest.raises(ValueError, match="increase eps"):
        _factorize(cov, 1e-9)


def test_mahalanobis_identity_metric_is_squared_euclidean():
    model = identity_model([[0.0, 0.0], [10.0, 10.0]])
    assert mahalanobis(np.array([3.0, 4.0]), 0, model) == 25.0
    assert mahalanobis(np.array([10.0, 10.0]), 1, model) == 0.0


def test_mahalanobis_matrix_matches_dense_inverse():
    rng = np.random.default_rng(4)
    model, _ = random_model(rng, 120, 3, 6)
    q = rng.normal(size=(40, 6))
    got = mahalanobis_matrix(q, model)
    prec = np.linalg.inv(model.covariance + model.shrinkage_eps * np.eye(6))
    for c in range(3):
        delta = q - model.means[c]
        expected = np.einsum("nd,de,ne->n", delta, prec, delta)
        assert np.allclose(got[:, c], expected, rtol=1e-8, atol=0)


def test_mahalanobis_single_matches_matrix_row():
    rng = np.random.default_rng(5)
    model, _ = random_model(rng, 60, 4, 3)
    q = rng.normal(size=3)
    row = mahalanobis_matrix(q, model)[0]
    for c in range(4):
        # batch path accumulates via einsum, single path via dot
        assert mahalanobis(q, c, model) == pytest.approx(row[c], rel=1e-12)


def test_mahalanobis_errors():
    model = two_class_toy()
    with pytest.raises(ValueError, match="dimension mismatch"):
        mahalanobis_matrix(np.zeros((2, 5)), model)
    with pytest.raises(ValueError, match="dimension mismatch"):
        mahalanobis(np.zeros(5), 0, model)


def test_predict_reduces_to_nearest_mean_under_identity():
    rng = np.random.default_rng(6)
    means = rng.normal(scale=5.0, size=(4, 3))
    model = identity_model(means)
    q = rng.normal(scale=5.0, size=(50, 3))
    expected = np.argmin(
        ((q[:, None, :] - means[None]) ** 2).sum(axis=2), axis=1
    )
    assert np.array_equal(predict_batch(q, model), expected)


def test_predict_tie_breaks_to_lowest_class():
    model = identity_model([[-1.0, 0.0], [1.0, 0.0]])
    assert predict(np.array([0.0, 0.0]), model) == 0


def test_predict_requires_a_present_class():
    model = two_class_toy()
    empty = LdaModel(
        means=model.means,
        covariance=model.covariance,
        precision_factor=model.precision_factor,
        shrinkage_eps=model.shrinkage_eps,
        timestamp=1,
        class_present=np.array([False, False]),
    )
    with pytest.raises(ValueError, match="no present classes"):
        predict_batch(np.zeros((1, 2)), empty)


def test_posterior_symmetric_point_splits_evenly():
    model = identity_model([[-1.0, 0.0], [1.0, 0.0]])
    assert np.allclose(posterior(np.array([0.0, 0.0]), model), [0.5, 0.5])


def test_posterior_far_point_saturates():
    model = identity_model([[0.0, 0.0], [100.0, 0.0]])
    p = posterior(np.array([0.0, 0.0]), model)
    assert p[0] > 1 - 1e-12


def test_posterior_rows_sum_to_one_and_agree_with_predict():
    rng = np.random.default_rng(7)
    model, _ = random_model(rng, 80, 3, 4)
    q = rng.normal(size=(30, 4))
    p = posterior_batch(q, model)
    assert np.allclose(p.sum(axis=1), 1.0)
    assert np.array_equal(np.argmax(p, axis=1), predict_batch(q, model))


def test_absent_class_is_never_predicted():
    rng = np.random.default_rng(8)
    x = rng.normal(size=(20, 3))
    labels = np.array([0, 2] * 10)
    model = fit_arrays(x, labels, 3)
    assert model.class_present.tolist() == [True, False, True]
    q = rng.normal(size=(25, 3))
    d = mahalanobis_matrix(q, model)
    assert np.isinf(d[:, 1]).all()
    assert not (predict_batch(q, model) == 1).any()
    assert (posterior_batch(q, model)[:, 1] == 0.0).all()
    with pytest.raises(ValueError, match="absent"):
        mahalanobis(q[0], 1, model)


@given(seed=st.integers(0, 2**31))
@settings(max_examples=25)
def test_distances_nonnegative_and_posteriors_normalized(seed):
    rng = np.random.default_rng(seed)
    model, _ = random_model(rng, 40, 3, 4)
    q = rng.normal(size=(10, 4))
    d = mahalanobis_matrix(q, model)
    assert (d >= 0).all()
    assert np.allclose(posterior_batch(q, model).sum(axis=1), 1.0)


def test_moving_average_t1_returns_new_fit():
    rng = np.random.default_rng(9)
    prev, _ = random_model(rng, 30, 2, 3)
    new, _ = random_model(rng, 30, 2, 3)
    out = moving_average_update(prev, new, 1)
    assert np.array_equal(out.means, new.means)
    assert np.array_equal(out.covariance, new.covariance)
    assert out.timestamp == 2


def test_moving_average_is_a_fixed_point():
    rng = np.random.default_rng(10)
    model, _ = random_model(rng, 30, 2, 3)
    out = moving_average_update(model, model, 5)
    assert np.allclose(out.means, model.means, rtol=0, atol=1e-15)
    assert np.allclose(out.covariance, model.covariance, rtol=0, atol=1e-15)


def test_moving_average_t3_arithmetic():
    rng = np.random.default_rng(11)
    prev, _ = random_model(rng, 30, 2, 3)
    new, _ = random_model(rng, 30, 2, 3)
    out = moving_average_update(prev, new, 3)
    assert np.array_equal(out.means, (2 / 3) * prev.means + (1 / 3) * new.means)
    assert np.array_equal(
        out.covariance, (2 / 3) * prev.covariance + (1 / 3) * new.covariance
    )
    assert out.timestamp == 4


def test_moving_average_equals_running_mean_of_fits():
    rng = np.random.default_rng(12)
    fits = [random_model(rng, 30, 2, 3)[0] for _ in range(4)]
    model = fits[0]
    for epoch, f in enumerate(fits, start=1):
        model = moving_average_update(model if epoch > 1 else f, f, epoch)
    assert np.allclose(
        model.means, np.mean([f.means for f in fits], axis=0), atol=1e-12
    )
    assert model.timestamp == 5


def test_moving_average_absent_class_inherits_from_present_side():
    rng = np.random.default_rng(13)
    full, _ = random_model(rng, 40, 3, 3)
    x = rng.normal(size=(20, 3))
    partial = fit_arrays(x, np.array([0, 2] * 10), 3)
    out = moving_average_update(full, partial, 4)
    assert np.array_equal(out.means[1], full.means[1])
    assert out.class_present.all()
    swapped = moving_average_update(partial, full, 4)
    assert np.array_equal(swapped.means[1], full.means[1])


def test_moving_average_preserves_symmetry():
    rng = np.random.default_rng(14)
    prev, _ = random_model(rng, 30, 2, 4)
    new, _ = random_model(rng, 30, 2, 4)
    out = moving_average_update(prev, new, 7)
    assert np.array_equal(out.covariance, out.covariance.T)


def test_moving_average_validation():
    rng = np.random.default_rng(15)
    a, _ = random_model(rng, 20, 2, 3)
    b, _ = random_model(rng, 20, 2, 4)
    with pytest.raises(ValueError, match="at least 1"):
        moving_average_update(a, a, 0)
    with pytest.raises(ValueError, match="shape mismatch"):
        moving_average_update(a, b, 2)


def test_moving_average_inherits_eps_request_from_new_fit():
    rng = np.random.default_rng(16)
    prev, _ = random_model(rng, 30, 2, 3, eps=0.7)
    new, _ = random_model(rng, 30, 2, 3, eps=0.2)
    out = moving_average_update(prev, new, 2)
    assert out.eps_request == 0.2
    assert out.shrinkage_eps == 0.2


def test_model_file_round_trip_exact(tmp_path):
    rng = np.random.default_rng(17)
    model, _ = random_model(rng, 50, 3, 5, eps=0.31)
    blended = moving_average_update(model, model, 3)
    path = tmp_path / "m.clda"
    write_model_file(blended, path)
    back = read_model_file(path)
    assert np.array_equal(back.means, blended.means)
    assert np.array_equal(back.covariance, blended.covariance)
    assert back.shrinkage_eps == blended.shrinkage_eps
    assert back.eps_request == blended.eps_request
    assert back.timestamp == blended.timestamp
    assert np.array_equal(back.class_present, blended.class_present)
    assert np.array_equal(back.precision_factor, blended.precision_factor)


def test_model_file_round_trip_auto_eps(tmp_path):
    rng = np.random.default_rng(18)
    model, _ = random_model(rng, 50, 2, 3)
    assert model.eps_request is None
    path = tmp_path / "m.clda"
    write_model_file(model, path)
    back = read_model_file(path)
    assert back.eps_request is None
    assert back.shrinkage_eps == model.shrinkage_eps


def test_model_file_predictions_survive_round_trip(tmp_path):
    rng = np.random.default_rng(19)
    model, _ = random_model(rng, 60, 3, 4)
    q = rng.normal(size=(20, 4))
    path = tmp_path / "m.clda"
    write_model_file(model, path)
    back = read_model_file(path)
    assert np.array_equal(mahalanobis_matrix(q, back), mahalanobis_matrix(q, model))


def test_model_file_error_paths(tmp_path):
    rng = np.random.default_rng(20)
    model, _ = random_model(rng, 30, 2, 3)
    path = tmp_path / "m.clda"
    write_model_file(model, path)
    raw = path.read_bytes()

    bad_magic = tmp_path / "bad_magic.clda"
    bad_magic.write_bytes(b"NOPE" + raw[4:])
    with pytest.raises(FeatureFormatError, match="bad magic"):
        read_model_file(bad_magic)

    bad_version = tmp_path / "bad_version.clda"
    bad_version.write_bytes(raw[:4] + (9).to_bytes(4, "little") + raw[8:])
    with pytest.raises(FeatureFormatError, match="version 9"):
        read_model_file(bad_version)

    truncated = tmp_path / "truncated.clda"
    truncated.write_bytes(raw[:-8])
    with pytest.raises(FeatureFormatError, match="length"):
        read_model_file(truncated)

    padded = tmp_path / "padded.clda"
    padded.write_bytes(raw + b"\x00")
    with pytest.raises(FeatureFormatError, match="length"):
        read_model_file(padded)

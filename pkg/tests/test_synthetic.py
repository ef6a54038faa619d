import numpy as np
import pytest

from clda.feature_store import validate_dataset
from clda.synthetic import confusion_map, make_mixture_dataset


def test_generation_is_deterministic():
    a, ta = make_mixture_dataset(100, 3, 8, seed=42, corruption=0.2)
    b, tb = make_mixture_dataset(100, 3, 8, seed=42, corruption=0.2)
    assert np.array_equal(ta, tb)
    assert np.array_equal(a.h_last_matrix(), b.h_last_matrix())
    assert np.array_equal(a.h_verb_matrix(), b.h_verb_matrix())
    assert np.array_equal(a.pseudo_labels(), b.pseudo_labels())


def test_output_passes_dataset_validation():
    ds, truths = make_mixture_dataset(50, 4, 6, seed=0, corruption=0.3)
    validate_dataset(ds)
    assert len(ds) == 50
    assert ds.num_labels == 4
    assert np.array_equal(ds.true_labels(), truths)


def test_every_class_appears_in_the_truths():
    _, truths = make_mixture_dataset(12, 5, 8, seed=1)
    assert set(truths.tolist()) == set(range(5))


def test_exact_corruption_count():
    for corruption in (0.0, 0.1, 0.25):
        ds, truths = make_mixture_dataset(200, 3, 8, seed=2, corruption=corruption)
        wrong = int((ds.pseudo_labels() != truths).sum())
        assert wrong == int(corruption * 200)


def test_label_map_relabels_systematically():
    label_map = {0: 0, 1: 2, 2: 1}
    ds, truths = make_mixture_dataset(150, 3, 8, seed=3, label_map=label_map)
    lut = np.array([0, 2, 1])
    assert np.array_equal(ds.pseudo_labels(), lut[truths])


def test_corrupted_records_get_weak_verbalizer_peaks():
    ds, truths = make_mixture_dataset(300, 3, 8, seed=4, corruption=0.3)
    pseudo = ds.pseudo_labels()
    verb = ds.h_verb_matrix()
    peak = verb[np.arange(300), pseudo]
    wrong = pseudo != truths
    # corrupted rows peak weakly, clean rows confidently, on average
    assert peak[wrong].mean() < peak[~wrong].mean()


def test_separation_controls_blob_distance():
    near, _ = make_mixture_dataset(100, 2, 8, seed=5, separation=1.0)
    far, _ = make_mixture_dataset(100, 2, 8, seed=5, separation=20.0)

    def spread(ds, truths):
        h = ds.h_last_matrix()
        m0 = h[truths == 0].mean(axis=0)
        m1 = h[truths == 1].mean(axis=0)
        return np.linalg.norm(m0 - m1)

    _, t_near = make_mixture_dataset(100, 2, 8, seed=5, separation=1.0)
    _, t_far = make_mixture_dataset(100, 2, 8, seed=5, separation=20.0)
    assert spread(far, t_far) > 10 * spread(near, t_near)


def test_dimension_must_cover_classes():
    with pytest.raises(ValueError, match="hidden_dim"):
        make_mixture_dataset(20, 5, 3, seed=0)


def test_label_map_values_validated():
    with pytest.raises(ValueError, match="label map"):
        make_mixture_dataset(20, 2, 4, seed=0, label_map={0: 0, 1: 7})


def test_confusion_map_deranges_the_wrong_block():
    m = confusion_map(6, 2)
    assert set(m.keys()) == {2, 3, 4, 5}  # correct classes are left implicit
    assert all(m[c] != c for c in m)
    assert set(m.values()) == set(m.keys())  # a permutation of the block


def test_confusion_map_identity_and_errors():
    assert confusion_map(3, 3) == {}
    with pytest.raises(ValueError):
        confusion_map(3, 2)  # a single wrong class cannot disagree with itself

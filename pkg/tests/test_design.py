import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ppcokrig import (FidelityData, ValidationError, add_prediction_point, build_augmentation,
                      toy_levels, validate_nested)
from ppcokrig.design import AugmentedDesign, match_rows


def _level(t, X, N=1):
    X = np.asarray(X, dtype=float)
    X = X[:, None] if X.ndim == 1 else X
    return FidelityData(t, X, np.zeros((len(X), N)) + np.arange(len(X))[:, None])


def test_fidelity_data_validation():
    with pytest.raises(ValidationError):
        FidelityData(1, np.zeros((3, 1)), np.zeros((2, 1)))
    with pytest.raises(ValidationError):
        FidelityData(1, np.array([[0.0], [np.nan]]), np.zeros((2, 1)))
    lv = FidelityData(1, np.zeros((3, 2)) + np.arange(3)[:, None], np.zeros((3, 4)))
    assert (lv.n, lv.d, lv.N) == (3, 2, 4)


def test_nested_design_has_no_missing():
    aug = build_augmentation([_level(1, [0, 0.25, 0.5, 0.75, 1]), _level(2, [0, 0.5, 1])])
    assert aug.n_mis == [0, 0] and aug.is_nested
    assert aug.n_aug == [5, 3]


def test_toy_layouts():
    # 20-point grid {-1, ..., 0.9}: -0.55 and 1.0 are not in it
    low20 = np.round(np.arange(20) * 0.1 - 1.0, 12)
    aug = build_augmentation(toy_levels(low20))
    assert aug.n_mis == [2, 0] and aug.n_aug[0] == 22
    raw = np.sort(aug.X_mis[0][:, 0] * aug.scaler.span[0] + aug.scaler.lo[0])
    np.testing.assert_allclose(raw, [-0.55, 1.0])
    # 21-point grid contains -0.2 and 1.0, leaving only -0.55
    aug = build_augmentation(toy_levels())
    assert aug.n_mis == [1, 0] and aug.n_aug[0] == 22


def test_storm_shaped_design(rng):
    X1 = rng.random((200, 3))
    X2 = np.vstack([X1[rng.choice(200, 50, replace=False)], rng.random((10, 3)) + 2.0])
    aug = build_augmentation([_level(1, X1), _level(2, X2)])
    assert aug.n_mis == [10, 0]
    assert aug.n_aug == [210, 60]
    assert validate_nested(aug)


def test_rejects_duplicates_and_inconsistent_shapes():
    with pytest.raises(ValidationError, match="rows 1 and 3"):
        build_augmentation([_level(1, [0.0, 0.5, 1e-12])])
    with pytest.raises(ValidationError):
        build_augmentation([_level(1, np.zeros((3, 2)) + np.arange(3)[:, None]),
                            _level(2, [0, 1])])
    with pytest.raises(ValidationError):
        build_augmentation([_level(1, [0, 0.5, 1], N=2), _level(2, [0, 1], N=3)])


def test_validate_nested_cases():
    assert validate_nested(build_augmentation([_level(1, [0, 0.5, 1])]))
    aug = build_augmentation([_level(1, [0, 0.5, 1]), _level(2, [0, 0.3, 1])])
    assert validate_nested(aug)
    # hand-built design with an orphan top-level point
    bad = AugmentedDesign(aug.scaler, aug.X_obs, [np.empty((0, 1)), np.empty((0, 1))], [])
    rep = validate_nested(bad)
    assert not rep and rep.violations == [(1, 1)]


def test_add_prediction_point_toy():
    aug = build_augmentation(toy_levels())
    # 0.5 is on the low-fidelity grid but not a high-fidelity input
    a0 = add_prediction_point(aug, [0.5])
    assert a0.n_aug == [22, 11]
    assert a0.x0_index == (15, 10)
    z = aug.scaler.transform(np.array([[0.5]]))
    for t in range(2):
        np.testing.assert_allclose(a0.X_aug[t][a0.x0_index[t]], z[0], atol=1e-12)
    assert validate_nested(a0)
    # a point on neither grid is appended to both levels
    a2 = add_prediction_point(aug, [0.55])
    assert a2.n_aug == [23, 11] and a2.x0_index == (22, 10)
    # already at every level: unchanged
    a1 = add_prediction_point(aug, [0.0])
    assert a1.n_aug == aug.n_aug
    assert a1.x0_index[1] == 5


def test_index_maps_round_trip():
    low20 = np.round(np.arange(20) * 0.1 - 1.0, 12)
    aug = build_augmentation(toy_levels(low20))
    for t in range(1, aug.s):
        idx = aug.index_maps[t]
        np.testing.assert_allclose(aug.X_aug[t - 1][idx], aug.X_aug[t], atol=1e-9)


def test_idempotent_on_nested():
    X1 = np.array([[0.0, 0.0], [0.3, 1.0], [1.0, 0.5], [0.6, 0.2]])
    aug = build_augmentation([_level(1, X1), _level(2, X1[[1, 3]])])
    for Xo, Xa in zip(aug.X_obs, aug.X_aug):
        np.testing.assert_array_equal(Xo, Xa)


def test_match_rows_tolerance():
    A = np.array([[0.5], [0.5 + 2e-9]])
    B = np.array([[0.5 + 5e-10]])
    np.testing.assert_array_equal(match_rows(A, B), [0, -1])


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n1=st.integers(3, 12), n_new=st.integers(0, 4),
       d=st.integers(1, 3), x0=st.lists(st.floats(-2, 2), min_size=3, max_size=3))
def test_augmentation_properties(seed, n1, n_new, d, x0):
    rng = np.random.default_rng(seed)
    X1 = rng.random((n1, d))
    X2 = np.vstack([X1[: n1 // 2], rng.random((n_new, d)) + 1.5])
    X3 = np.vstack([X2[:1], rng.random((1, d)) - 1.5])
    aug = build_augmentation([_level(1, X1), _level(2, X2), _level(3, X3)])
    assert validate_nested(aug)
    assert aug.n_mis[2] == 0
    a0 = add_prediction_point(aug, np.array(x0[:d]))
    assert validate_nested(a0)
    assert all(b - a in (0, 1) for a, b in zip(aug.n_aug, a0.n_aug))

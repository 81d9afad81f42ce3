"""Outlier pruning, order statistics, resample refits, PLSR score smoothing."""
import numpy as np
import pytest

from plumekit.cube_io import HyperCube, ScoreMap
from plumekit.detectors import DetectorKind
from plumekit.enhance import (
    EnhanceConfig,
    _grow_4neighborhood,
    _order_stat,
    outlier_split,
    plsr_enhance,
    remove_outliers,
    resample_enhance,
)
from plumekit.mixture import ModelSpec
from plumekit.numerics import fit_plsr, predict_plsr


def _cube(m=8, n=10, p=4, seed=0):
    rng = np.random.default_rng(seed)
    wn = np.linspace(800.0, 1200.0, p)
    rad = 1.0 + 0.1 * rng.standard_normal((m, n, p))
    return HyperCube(wavenumbers=wn, radiance=rad)


def test_config_validation():
    EnhanceConfig()  # defaults are legal
    with pytest.raises(ValueError):
        EnhanceConfig(outlier_fraction=1.0)
    with pytest.raises(ValueError):
        EnhanceConfig(outlier_fraction=-0.1)
    with pytest.raises(ValueError):
        EnhanceConfig(tau1=0.0)
    with pytest.raises(ValueError):
        EnhanceConfig(tau2=1.0)
    with pytest.raises(ValueError):
        EnhanceConfig(tau2=0.6, tau3=0.4)
    with pytest.raises(ValueError):
        EnhanceConfig(resample_rounds=-1)
    with pytest.raises(ValueError):
        EnhanceConfig(plsr_components=0)
    assert EnhanceConfig(plsr_components=None).plsr_components is None


def test_outlier_split_ceil_counts():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((100, 3))
    kept, removed = outlier_split(X, 0.01)
    assert removed.shape == (1,)
    mag = (X ** 2).sum(axis=1)
    assert removed[0] == np.argmax(mag)
    kept, removed = outlier_split(X, 0.011)  # ceil(1.1) = 2
    assert removed.shape == (2,)
    kept, removed = outlier_split(X, 0.0)
    assert removed.shape == (0,)
    np.testing.assert_array_equal(kept, np.arange(100))


def test_outlier_split_partitions_and_sorted():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((37, 5))
    kept, removed = outlier_split(X, 0.2)
    assert np.all(np.diff(kept) > 0) and np.all(np.diff(removed) > 0)
    np.testing.assert_array_equal(np.sort(np.concatenate([kept, removed])), np.arange(37))
    # every removed magnitude >= every kept magnitude
    mag = (X ** 2).sum(axis=1)
    assert mag[removed].min() >= mag[kept].max()


def test_outlier_split_ties_remove_highest_index():
    X = np.eye(8)  # all rows have magnitude 1
    kept, removed = outlier_split(X, 0.25)
    np.testing.assert_array_equal(removed, [6, 7])
    np.testing.assert_array_equal(kept, np.arange(6))


def test_outlier_split_rejects_bad_fraction():
    with pytest.raises(ValueError):
        outlier_split(np.eye(3), 1.0)


def test_remove_outliers_matches_flat_split():
    cube = _cube(seed=3)
    kept_c, removed_c = remove_outliers(cube, 0.05)
    kept_f, removed_f = outlier_split(cube.spectra(), 0.05)
    np.testing.assert_array_equal(kept_c, kept_f)
    np.testing.assert_array_equal(removed_c, removed_f)


def test_order_stat_hand_values():
    flat = np.array([5.0, 1.0, 3.0, 2.0, 4.0])
    assert _order_stat(flat, 0.2) == 1.0  # ceil(1.0) -> rank 1
    assert _order_stat(flat, 0.21) == 2.0  # ceil(1.05) -> rank 2
    assert _order_stat(flat, 1.0) == 5.0
    assert _order_stat(flat, 1e-9) == 1.0  # rank floors at 1


def test_grow_4neighborhood_center_and_borders():
    m = np.zeros((3, 4), dtype=bool)
    m[1, 1] = True
    g = _grow_4neighborhood(m)
    want = np.zeros((3, 4), dtype=bool)
    want[1, 1] = want[0, 1] = want[2, 1] = want[1, 0] = want[1, 2] = True
    np.testing.assert_array_equal(g, want)
    # corner seed grows only inward, no wrap to the far edge
    m = np.zeros((3, 4), dtype=bool)
    m[0, 0] = True
    g = _grow_4neighborhood(m)
    assert g[0, 0] and g[0, 1] and g[1, 0]
    assert g.sum() == 3
    assert not g[0, 3] and not g[2, 0]


def test_resample_enhance_matches_manual_steps():
    cube = _cube(m=10, n=12, seed=4)
    rng = np.random.default_rng(5)
    sigs = rng.uniform(0.5, 1.0, cube.p)
    spec = ModelSpec(model="gaussian", detector=DetectorKind.NMF, k=1, seed=0)
    first = spec.score_map(cube, sigs, spec.fit(cube.spectra()))
    out = resample_enhance(cube, first, sigs, 0.2, spec)
    # replicate: threshold, grow, refit, rescore
    delta1 = _order_stat(first.values.reshape(-1), 0.2)
    sel = _grow_4neighborhood(first.values <= delta1).reshape(-1)
    model = spec.fit(cube.spectra()[np.flatnonzero(sel)])
    want = spec.score_map(cube, sigs, model)
    np.testing.assert_array_equal(out.values, want.values)


def test_resample_enhance_deterministic():
    cube = _cube(m=9, n=9, seed=6)
    sigs = np.ones(cube.p)
    spec = ModelSpec(model="gaussian", detector=DetectorKind.NMF, k=2, seed=1)
    base = spec.score_map(cube, sigs, spec.fit(cube.spectra()))
    a = resample_enhance(cube, base, sigs, 0.3, spec)
    b = resample_enhance(cube, base, sigs, 0.3, spec)
    np.testing.assert_array_equal(a.values, b.values)


def test_resample_enhance_validates_inputs():
    cube = _cube(seed=7)
    wrong = ScoreMap(values=np.zeros((3, 3)))
    spec = ModelSpec(model="gaussian", detector=DetectorKind.NMF, k=1)
    with pytest.raises(ValueError):
        resample_enhance(cube, wrong, np.ones(cube.p), 0.2, spec)
    ok = ScoreMap(values=np.zeros((cube.m, cube.n)))
    with pytest.raises(ValueError):
        resample_enhance(cube, ok, np.ones(cube.p), 1.0, spec)


def test_plsr_enhance_matches_manual_fit():
    cube = _cube(m=6, n=8, seed=8)
    rng = np.random.default_rng(9)
    scores = ScoreMap(values=rng.standard_normal((6, 8)))
    out = plsr_enhance(cube, scores, 0.25, 0.25, 2)
    flat = scores.values.reshape(-1)
    sel = (flat <= _order_stat(flat, 0.25)) | (flat >= _order_stat(flat, 0.75))
    model = fit_plsr(cube.spectra()[sel], flat[sel], 2)
    want = predict_plsr(model, cube.spectra()).reshape(6, 8)
    np.testing.assert_array_equal(out.values, want)


def test_plsr_enhance_recovers_exact_linear_response():
    # scores already a linear function of the spectra: full-rank PLS refit
    # reproduces the same map
    cube = _cube(m=10, n=10, p=4, seed=10)
    w = np.array([0.3, -0.2, 0.5, 0.1])
    flat = cube.spectra() @ w + 0.7
    scores = ScoreMap(values=flat.reshape(10, 10))
    out = plsr_enhance(cube, scores, 0.3, 0.3, 4)
    np.testing.assert_allclose(out.values, scores.values, atol=1e-8)


def test_plsr_enhance_constant_selection_is_noop_copy():
    cube = _cube(seed=11)
    scores = ScoreMap(values=np.full((cube.m, cube.n), 2.5))
    out = plsr_enhance(cube, scores, 0.2, 0.2, 3)
    np.testing.assert_array_equal(out.values, scores.values)
    assert out.values is not scores.values


def test_plsr_enhance_selection_too_small():
    cube = _cube(m=4, n=4, seed=12)
    rng = np.random.default_rng(13)
    scores = ScoreMap(values=rng.standard_normal((4, 4)))
    # tau 0.25/0.25 on 16 pixels selects 4 + 5 = 9; 8 components need 10
    with pytest.raises(ValueError, match="selected 9 pixels"):
        plsr_enhance(cube, scores, 0.25, 0.25, 8)


def test_plsr_enhance_validates_inputs():
    cube = _cube(seed=14)
    wrong = ScoreMap(values=np.zeros((2, 2)))
    with pytest.raises(ValueError):
        plsr_enhance(cube, wrong, 0.2, 0.2, 1)
    ok = ScoreMap(values=np.zeros((cube.m, cube.n)))
    with pytest.raises(ValueError):
        plsr_enhance(cube, ok, 0.0, 0.2, 1)
    with pytest.raises(ValueError):
        plsr_enhance(cube, ok, 0.6, 0.5, 1)

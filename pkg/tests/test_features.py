import numpy as np
import pytest

from channelchart import (
    FeatureConfig,
    featurize_dataset,
    load_feature_matrix,
    save_feature_matrix,
    scaled_r2m,
    subcarrier_average,
)
from channelchart.errors import ContainerHeaderError, ContainerTruncatedError, FeatureError
from conftest import make_dataset


def naive_scaled_r2m(h, sigma):
    """Independent double-loop oracle."""
    h = np.asarray(h, dtype=np.complex128)
    norm = np.sqrt(sum(abs(v) ** 2 for v in h))
    if norm == 0:
        return np.zeros(len(h) ** 2)
    h_bar = [v * norm ** (2.0 / sigma - 1.0) for v in h]
    out = np.zeros(len(h) ** 2)
    for i in range(len(h)):
        for j in range(len(h)):
            out[i * len(h) + j] = (h_bar[i] * np.conj(h_bar[j])).real
    return out


def test_zero_input_zero_feature():
    f = scaled_r2m(np.zeros(5, dtype=complex))
    assert f.shape == (25,)
    assert np.all(f == 0.0)


def test_scalar_arithmetic_oracle():
    # B=1, h=[2], sigma=8: h_bar = 2^(1/4), feature = 2^(1/2)
    f = scaled_r2m(np.array([2.0 + 0j]), FeatureConfig(sigma=8.0))
    assert f.shape == (1,)
    assert abs(f[0] - np.sqrt(2.0)) < 1e-12


def test_matches_naive_oracle(rng):
    for _ in range(10):
        b = int(rng.integers(1, 9))
        h = rng.normal(size=b) + 1j * rng.normal(size=b)
        got = scaled_r2m(h, FeatureConfig(sigma=8.0))
        want = naive_scaled_r2m(h, 8.0)
        assert np.allclose(got, want, atol=1e-12)


def test_phase_invariance(rng):
    h = rng.normal(size=6) + 1j * rng.normal(size=6)
    for phi in (0.3, 1.2, -2.5):
        rotated = np.exp(1j * phi) * h
        assert np.allclose(scaled_r2m(rotated), scaled_r2m(h), atol=1e-12)


def test_norm_law(rng):
    # Frobenius norm of the Hermitian source equals ||h||^(4/sigma)
    for sigma in (2.0, 8.0, 16.0):
        h = rng.normal(size=5) + 1j * rng.normal(size=5)
        norm = np.linalg.norm(h)
        h_bar = h * norm ** (2.0 / sigma - 1.0)
        frob = np.linalg.norm(np.outer(h_bar, np.conj(h_bar)))
        assert abs(frob - norm ** (4.0 / sigma)) < 1e-10


def test_reshaped_feature_symmetric_nonneg_diagonal(rng):
    b = 7
    h = rng.normal(size=b) + 1j * rng.normal(size=b)
    mat = scaled_r2m(h).reshape(b, b)
    assert np.allclose(mat, mat.T, atol=1e-12)
    assert np.all(np.diag(mat) >= 0)


def test_scaling_monotonicity(rng):
    h = rng.normal(size=4) + 1j * rng.normal(size=4)
    sigma = 8.0
    base = scaled_r2m(h, FeatureConfig(sigma=sigma))
    for c in (1.5, 2.0, 5.0):
        scaled = scaled_r2m(c * h, FeatureConfig(sigma=sigma))
        assert np.allclose(scaled, c ** (4.0 / sigma) * base, atol=1e-9)
        assert np.linalg.norm(scaled) > np.linalg.norm(base)


def test_non_finite_rejected():
    with pytest.raises(FeatureError):
        scaled_r2m(np.array([1.0 + 0j, np.nan + 0j]))


def test_sigma_must_be_positive():
    with pytest.raises(FeatureError):
        FeatureConfig(sigma=0.0)


def test_featurize_dataset_shape_and_rows(rng):
    ds = make_dataset(rng, n=9, b=4, w=6)
    reduced = subcarrier_average(ds, 1, 3)
    matrix = featurize_dataset(reduced, FeatureConfig(sigma=8.0))
    assert matrix.shape == (9, 16)
    assert matrix.dtype == np.float32
    for i in range(9):
        want = naive_scaled_r2m(reduced.h[i], 8.0)
        assert np.allclose(matrix[i], want, atol=1e-6 * max(1.0, np.abs(want).max()))


def test_featurize_b32_gives_1024_dims(rng):
    ds = make_dataset(rng, n=2, b=32, w=4)
    matrix = featurize_dataset(subcarrier_average(ds, 0, 4))
    assert matrix.shape == (2, 1024)


def test_single_point_dataset(rng):
    ds = make_dataset(rng, n=1, b=3, w=2)
    matrix = featurize_dataset(subcarrier_average(ds, 0, 2))
    assert matrix.shape == (1, 9)


def test_cache_round_trip(rng, tmp_path):
    matrix = rng.normal(size=(17, 9)).astype(np.float32)
    path = tmp_path / "f.ccft"
    save_feature_matrix(matrix, path)
    back = load_feature_matrix(path)
    assert np.array_equal(back, matrix)


def test_cache_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.ccft"
    path.write_bytes(b"XXXX" + bytes(16))
    with pytest.raises(ContainerHeaderError):
        load_feature_matrix(path)


def test_cache_rejects_truncation(rng, tmp_path):
    matrix = rng.normal(size=(4, 3)).astype(np.float32)
    path = tmp_path / "t.ccft"
    save_feature_matrix(matrix, path)
    path.write_bytes(path.read_bytes()[:-3])
    with pytest.raises(ContainerTruncatedError):
        load_feature_matrix(path)

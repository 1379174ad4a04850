import numpy as np
import pytest

from channelchart import continuity, evaluate, kruskal_stress, rank_matrix, trustworthiness
from channelchart.errors import MetricsError

# ---------------------------------------------------------------- oracles


def naive_rank_matrix(points):
    """O(N^2 log N) reference: per-point sort by (distance, index)."""
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts)
    ranks = np.zeros((n, n), dtype=np.int64)
    for i in range(n):
        order = sorted((np.linalg.norm(pts[j] - pts[i]), j) for j in range(n) if j != i)
        for rank, (_, j) in enumerate(order, start=1):
            ranks[i, j] = rank
    return ranks


def naive_trustworthiness(x, z, k):
    rx = naive_rank_matrix(x)
    rz = naive_rank_matrix(z)
    n = len(x)
    total = 0
    for i in range(n):
        for j in range(n):
            if j != i and rz[i, j] <= k < rx[i, j]:
                total += rx[i, j] - k
    return 1.0 - 2.0 / (n * k * (2 * n - 3 * k - 1)) * total


def naive_continuity(x, z, k):
    rx = naive_rank_matrix(x)
    rz = naive_rank_matrix(z)
    n = len(x)
    total = 0
    for i in range(n):
        for j in range(n):
            if j != i and rx[i, j] <= k < rz[i, j]:
                total += rz[i, j] - k
    return 1.0 - 2.0 / (n * k * (2 * n - 3 * k - 1)) * total


def naive_kruskal_stress(x, z):
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    n = len(x)
    d = []
    delta = []
    for i in range(n):
        for j in range(i + 1, n):
            d.append(np.linalg.norm(x[i] - x[j]))
            delta.append(np.linalg.norm(z[i] - z[j]))
    d = np.asarray(d)
    delta = np.asarray(delta)
    if np.sum(delta**2) == 0:
        return 1.0
    beta = np.sum(d * delta) / np.sum(delta**2)
    return float(np.sqrt(np.sum((d - beta * delta) ** 2) / np.sum(d**2)))


def random_rotation(rng, dim):
    q, r = np.linalg.qr(rng.normal(size=(dim, dim)))
    return q * np.sign(np.diag(r))


# ---------------------------------------------------------------- rank matrix


def test_rank_matrix_three_collinear_points():
    ranks = rank_matrix(np.array([[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]]))
    assert ranks[0, 1] == 1 and ranks[0, 2] == 2
    assert ranks[1, 0] == 1 and ranks[1, 2] == 2
    assert ranks[2, 1] == 1 and ranks[2, 0] == 2
    assert np.all(np.diag(ranks) == 0)


def test_rank_matrix_duplicate_points_tie_break_by_index():
    pts = np.array([[0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [5.0, 0.0]])
    ranks = rank_matrix(pts)
    # from point 2 both duplicates are at distance 0: lower index first
    assert ranks[2, 0] == 1 and ranks[2, 1] == 2 and ranks[2, 3] == 3
    assert ranks[3, 0] == 1 and ranks[3, 1] == 2 and ranks[3, 2] == 3


def test_rank_matrix_permutation_equivariance(rng):
    pts = rng.normal(size=(12, 3))
    perm = rng.permutation(12)
    base = rank_matrix(pts)
    permuted = rank_matrix(pts[perm])
    # ranks are not invariant under relabeling (ties break by index), but
    # distinct-distance inputs are: check on perturbed generic points
    assert np.array_equal(permuted, base[np.ix_(perm, perm)])


def test_rank_matrix_matches_naive(rng):
    for _ in range(5):
        pts = rng.normal(size=(rng.integers(2, 30), rng.choice([2, 3])))
        assert np.array_equal(rank_matrix(pts), naive_rank_matrix(pts))


def test_rank_matrix_needs_two_points():
    with pytest.raises(MetricsError):
        rank_matrix(np.zeros((1, 2)))


# ---------------------------------------------------------------- TW / CT


def test_identity_embedding_perfect_scores(rng):
    x = rng.normal(size=(60, 2))
    assert trustworthiness(x, x, 3) == 1.0
    assert continuity(x, x, 3) == 1.0


def test_tw_ct_match_naive_oracle(rng):
    x = rng.normal(size=(40, 3))
    z = rng.normal(size=(40, 2))
    for k in (1, 2, 5, 20):
        assert trustworthiness(x, z, k) == pytest.approx(naive_trustworthiness(x, z, k), abs=1e-12)
        assert continuity(x, z, k) == pytest.approx(naive_continuity(x, z, k), abs=1e-12)


def test_tw_of_permuted_embedding_matches_naive(rng):
    x = rng.normal(size=(100, 2))
    z = x[rng.permutation(100)]
    assert trustworthiness(x, z, 5) == pytest.approx(naive_trustworthiness(x, z, 5), abs=1e-12)


def test_role_exchange_duality(rng):
    x = rng.normal(size=(30, 2))
    z = rng.normal(size=(30, 2))
    for k in (1, 4, 10):
        assert continuity(x, z, k) == trustworthiness(z, x, k)


def test_k_out_of_range(rng):
    x = rng.normal(size=(10, 2))
    with pytest.raises(MetricsError):
        trustworthiness(x, x, 0)
    with pytest.raises(MetricsError):
        trustworthiness(x, x, 6)  # K > N/2


def test_scores_in_unit_interval(rng):
    for _ in range(5):
        n = int(rng.integers(10, 50))
        x = rng.normal(size=(n, 2))
        z = rng.normal(size=(n, 2))
        k = int(rng.integers(1, n // 2 + 1))
        assert 0.0 <= trustworthiness(x, z, k) <= 1.0
        assert 0.0 <= continuity(x, z, k) <= 1.0


# ---------------------------------------------------------------- Kruskal stress


def test_similarity_transform_gives_zero_stress(rng):
    x = rng.normal(size=(50, 2))
    rot = random_rotation(rng, 2)
    z = 3.7 * x @ rot.T + np.array([4.0, -1.0])
    assert kruskal_stress(x, z) <= 1e-9


def test_stress_matches_symbolic_least_squares():
    x = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0], [3.0, 1.0], [2.0, 2.0]])
    z = np.array([[0.1, 0.0], [1.2, 0.3], [-0.2, 1.9], [2.8, 1.2], [2.2, 1.8]])
    assert kruskal_stress(x, z) == pytest.approx(naive_kruskal_stress(x, z), abs=1e-12)


def test_stress_matches_naive_random(rng):
    for _ in range(5):
        n = int(rng.integers(3, 25))
        x = rng.normal(size=(n, 3))
        z = rng.normal(size=(n, 2))
        assert kruskal_stress(x, z) == pytest.approx(naive_kruskal_stress(x, z), abs=1e-12)


def test_degenerate_chart_stress_one(rng):
    x = rng.normal(size=(10, 2))
    z = np.ones((10, 2))
    assert kruskal_stress(x, z) == 1.0


def test_stress_bounded_and_monotone_under_noise(rng):
    x = rng.normal(size=(40, 2))
    medians = []
    for noise in (0.0, 0.5, 2.0, 8.0):
        vals = []
        for seed in range(5):
            z = x + np.random.default_rng(seed).normal(scale=noise, size=x.shape)
            ks = kruskal_stress(x, z)
            assert 0.0 <= ks <= 1.0 + 1e-12
            vals.append(ks)
        medians.append(np.median(vals))
    assert all(b >= a - 1e-12 for a, b in zip(medians, medians[1:]))


# ---------------------------------------------------------------- evaluate


def test_identity_report(rng):
    x = rng.normal(size=(100, 2))
    report = evaluate(x, x)
    assert report.ct == 1.0 and report.tw == 1.0 and report.ks <= 1e-12
    assert report.k_used == 5
    assert report.n_used == 100


def test_subsample_determinism(rng):
    x = rng.normal(size=(500, 2))
    z = x + rng.normal(scale=0.1, size=x.shape)
    a = evaluate(x, z, subsample=100, seed=42)
    b = evaluate(x, z, subsample=100, seed=42)
    assert a == b
    c = evaluate(x, z, subsample=100, seed=43)
    assert c != a


def test_subsample_stability(rng):
    # subsampled CT/TW close to the full-set values on a smooth chart
    x = rng.normal(size=(3000, 2))
    rot = random_rotation(rng, 2)
    z = x @ rot.T + rng.normal(scale=0.05, size=x.shape)
    full = evaluate(x, z)
    sub = evaluate(x, z, subsample=1000, seed=7)
    assert abs(full.ct - sub.ct) < 0.02
    assert abs(full.tw - sub.tw) < 0.02


def test_subsample_larger_than_n_rejected(rng):
    x = rng.normal(size=(10, 2))
    with pytest.raises(MetricsError):
        evaluate(x, x, subsample=11)


def test_mismatched_lengths_rejected(rng):
    with pytest.raises(MetricsError):
        evaluate(rng.normal(size=(10, 2)), rng.normal(size=(9, 2)))


def test_small_n_clamps_k_to_one(rng):
    x = rng.normal(size=(10, 2))
    report = evaluate(x, x)
    assert report.k_used == 1

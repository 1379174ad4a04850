import numpy as np
import pytest

from channelchart import chartnet
from channelchart.chartnet import (
    ChartingNetwork,
    NetworkConfig,
    TrainConfig,
    batch_is_safe,
    forward,
    gradient_check,
    load_weights,
    map_features,
    save_weights,
    train,
    triplet_loss,
)
from channelchart.errors import NetworkError, TrainingDivergedError
from channelchart.triplets import TripletSet


def naive_forward(net, x):
    """Scalar-loop reference forward pass."""
    x = [(float(v) - float(m)) / float(s) for v, m, s in zip(x, net.feature_mean, net.feature_scale)]
    for layer, (w, b) in enumerate(zip(net.weights, net.biases)):
        out = []
        for j in range(w.shape[1]):
            acc = float(b[j])
            for i in range(w.shape[0]):
                acc += x[i] * float(w[i, j])
            out.append(acc)
        if layer < len(net.weights) - 1:
            out = [max(0.0, v) for v in out]
        x = out
    return np.asarray(x)


def random_triplet_set(rng, n, count):
    anchors = rng.integers(0, n, count)
    positives = (anchors + 1 + rng.integers(0, n - 1, count)) % n
    negatives = (anchors + 1 + rng.integers(0, n - 1, count)) % n
    return TripletSet(anchors, positives, negatives, rule="manual")


def safe_random_batch(rng, net, margin=1.0, epsilon=1e-4, size=4):
    dim = net.config.input_dim
    for _ in range(200):
        xa = rng.normal(size=(size, dim))
        xp = rng.normal(size=(size, dim))
        xn = rng.normal(size=(size, dim))
        if batch_is_safe(net, xa, xp, xn, margin, epsilon):
            return xa, xp, xn
    raise AssertionError("could not find a batch away from kink points")


class TestForward:
    def test_all_zero_network_maps_to_origin(self, rng):
        cfg = NetworkConfig(input_dim=5, hidden_layers=(4,))
        net = ChartingNetwork(
            cfg,
            [np.zeros((5, 4)), np.zeros((4, 2))],
            [np.zeros(4), np.zeros(2)],
        )
        for _ in range(3):
            z = forward(net, rng.normal(size=5))
            assert np.array_equal(z, np.zeros(2))

    def test_identity_single_layer(self):
        cfg = NetworkConfig(input_dim=2, hidden_layers=())
        net = ChartingNetwork(cfg, [np.eye(2, dtype=np.float32)], [np.zeros(2)])
        x = np.array([3.5, -1.25], dtype=np.float32)
        assert np.allclose(forward(net, x), x)

    def test_matches_scalar_reference(self, rng):
        cfg = NetworkConfig(input_dim=6, hidden_layers=(5, 3), init_seed=11)
        net = ChartingNetwork.initialize(cfg)
        net.feature_mean = rng.normal(size=6).astype(np.float32)
        net.feature_scale = (0.5 + rng.uniform(size=6)).astype(np.float32)
        for _ in range(5):
            x = rng.normal(size=6).astype(np.float32)
            assert np.allclose(forward(net, x), naive_forward(net, x), atol=1e-5)

    def test_dimension_mismatch(self, rng):
        net = ChartingNetwork.initialize(NetworkConfig(input_dim=4, hidden_layers=(3,)))
        with pytest.raises(NetworkError):
            forward(net, rng.normal(size=5))

    def test_batch_forward_matches_single(self, rng):
        net = ChartingNetwork.initialize(NetworkConfig(input_dim=4, hidden_layers=(3,)))
        batch = rng.normal(size=(7, 4)).astype(np.float32)
        stacked = map_features(net, batch)
        for i in range(7):
            assert np.allclose(stacked[i], forward(net, batch[i]), atol=1e-6)


class TestTripletLoss:
    def test_satisfied_margin_zero_loss(self):
        z = np.array([0.0, 0.0])
        assert triplet_loss(z, z, np.array([5.0, 0.0]), margin=1.0) == 0.0

    def test_anchor_equals_negative(self):
        z_a = np.array([0.0, 0.0])
        z_p = np.array([2.0, 0.0])
        assert triplet_loss(z_a, z_p, z_a, margin=1.0) == pytest.approx(3.0)

    def test_nonnegative_and_boundary(self, rng):
        for _ in range(50):
            za, zp, zn = rng.normal(size=(3, 2))
            loss = triplet_loss(za, zp, zn, margin=1.0)
            assert loss >= 0.0
            gap = np.linalg.norm(za - zn) - np.linalg.norm(za - zp)
            if gap >= 1.0:
                assert loss == 0.0
            else:
                assert loss == pytest.approx(1.0 - gap)

    def test_translation_invariance(self, rng):
        za, zp, zn = rng.normal(size=(3, 2))
        shift = rng.normal(size=2)
        assert triplet_loss(za, zp, zn) == pytest.approx(
            triplet_loss(za + shift, zp + shift, zn + shift), abs=1e-12
        )


class TestGradientCheck:
    def test_small_net_passes(self, rng):
        net = ChartingNetwork.initialize(NetworkConfig(input_dim=6, hidden_layers=(5, 4), init_seed=3))
        xa, xp, xn = safe_random_batch(rng, net)
        err = gradient_check(net, xa, xp, xn, margin=1.0, epsilon=1e-4)
        assert err < 1e-3

    def test_error_shrinks_quadratically(self, rng):
        net = ChartingNetwork.initialize(NetworkConfig(input_dim=5, hidden_layers=(4,), init_seed=5))
        xa, xp, xn = safe_random_batch(rng, net, epsilon=1e-4)
        err1 = gradient_check(net, xa, xp, xn, margin=1.0, epsilon=1e-4)
        err2 = gradient_check(net, xa, xp, xn, margin=1.0, epsilon=5e-5)
        assert err2 <= err1 / 2.0

    def test_zero_loss_batch_gives_zero_error(self, rng):
        # margin satisfied everywhere: analytic and numeric gradients both 0
        net = ChartingNetwork.initialize(NetworkConfig(input_dim=3, hidden_layers=(4,), init_seed=1))
        xa = rng.normal(size=(3, 3))
        xn = xa + 50.0  # negatives mapped far away
        xp = xa + 1e-3
        za = map_features(net, xa)
        zp = map_features(net, xp)
        zn = map_features(net, xn)
        gaps = np.linalg.norm(za - zn, axis=1) - np.linalg.norm(za - zp, axis=1)
        assume = gaps > 1.5  # all hinges comfortably inactive
        if not np.all(assume):
            pytest.skip("batch construction did not deactivate every hinge")
        assert gradient_check(net, xa, xp, xn, margin=1.0, epsilon=1e-4) == 0.0


class TestTrain:
    def test_zero_epochs_returns_initialized_network(self, rng):
        feats = rng.normal(size=(20, 6)).astype(np.float32)
        ts = random_triplet_set(rng, 20, 100)
        cfg = NetworkConfig(input_dim=6, init_seed=4)
        net, history = train(feats, ts, cfg, TrainConfig(epochs=0))
        fresh = ChartingNetwork.initialize(cfg)
        assert history == []
        for w1, w2 in zip(net.weights, fresh.weights):
            assert np.array_equal(w1, w2)

    def test_deterministic_weights(self, rng):
        feats = rng.normal(size=(30, 5)).astype(np.float32)
        ts = random_triplet_set(rng, 30, 500)
        cfg = NetworkConfig(input_dim=5, hidden_layers=(8,), init_seed=2)
        tc = TrainConfig(epochs=3, seed=9)
        net1, h1 = train(feats, ts, cfg, tc)
        net2, h2 = train(feats, ts, cfg, tc)
        assert h1 == h2
        for w1, w2 in zip(net1.weights, net2.weights):
            assert np.array_equal(w1, w2)
        for b1, b2 in zip(net1.biases, net2.biases):
            assert np.array_equal(b1, b2)

    def test_loss_decreases_on_structured_data(self, rng):
        # points on a ring: positives adjacent, negatives uniform
        n = 60
        angles = np.linspace(0, 2 * np.pi, n, endpoint=False)
        feats = np.stack([np.cos(angles), np.sin(angles), np.cos(2 * angles), np.sin(2 * angles)], axis=1)
        anchors = rng.integers(0, n, 4000)
        positives = (anchors + 1) % n
        negatives = (anchors + 1 + rng.integers(0, n - 1, 4000)) % n
        ts = TripletSet(anchors, positives, negatives, rule="manual")
        net, history = train(feats.astype(np.float32), ts, None, TrainConfig(epochs=10, seed=0))
        assert history[-1] < history[0]

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_aborts_with_location(self, rng):
        feats = (rng.normal(size=(20, 4)) * 1e18).astype(np.float32)
        ts = random_triplet_set(rng, 20, 200)
        with pytest.raises(TrainingDivergedError) as err:
            train(feats, ts, None, TrainConfig(epochs=2, learning_rate=1e30, seed=0))
        assert err.value.epoch >= 0
        assert err.value.batch >= 0

    def test_triplet_indices_validated(self, rng):
        feats = rng.normal(size=(10, 4)).astype(np.float32)
        ts = TripletSet(np.array([5]), np.array([11]), np.array([3]), rule="manual")
        with pytest.raises(NetworkError):
            train(feats, ts, None, TrainConfig(epochs=1))

    def test_line_dataset_ordering_recovered(self):
        # 50 points on a line with smooth far-field CSI: after genie-triplet
        # training the chart's principal-axis ordering reproduces the
        # ground-truth ordering exactly (or exactly reversed). Frozen config
        # validated over several training seeds before pinning this one.
        from channelchart import (
            FeatureConfig,
            GenieSelectionConfig,
            SynthConfig,
            featurize_dataset,
            select_genie,
            subcarrier_average,
            synthesize_los_dataset,
        )

        cfg = SynthConfig(
            n=50,
            b=16,
            w=8,
            area=((0.0, 4.0), (0.0, 0.0)),
            rows=1,
            carrier_freq=30e6,
            bandwidth=10e6,
            seed=7,
        )
        ds = synthesize_los_dataset(cfg)
        feats = featurize_dataset(subcarrier_average(ds, 0, 8), FeatureConfig())
        ts = select_genie(ds, GenieSelectionConfig(d_c=1.5, count=50000, seed=1))
        net_config = NetworkConfig(input_dim=feats.shape[1], init_seed=0)
        net, _ = train(feats, ts, net_config, TrainConfig(epochs=30, seed=0, batch_size=256))
        z = map_features(net, feats)
        centered = (z - z.mean(axis=0)).astype(np.float64)
        _, _, vt = np.linalg.svd(centered, full_matrices=False)
        order = np.argsort(centered @ vt[0])
        truth = np.arange(50)
        assert np.array_equal(order, truth) or np.array_equal(order, truth[::-1])

    def test_weight_sharing_single_parameter_set(self, rng):
        # the three roles are charted by the same parameters: mapping the
        # same point in all roles of a degenerate forward gives identical z
        feats = rng.normal(size=(12, 4)).astype(np.float32)
        ts = random_triplet_set(rng, 12, 64)
        net, _ = train(feats, ts, None, TrainConfig(epochs=1, seed=3))
        z = map_features(net, feats)
        assert np.array_equal(map_features(net, feats), z)


class TestWeightsIO:
    def test_round_trip_bit_exact(self, rng, tmp_path):
        feats = rng.normal(size=(25, 6)).astype(np.float32)
        ts = random_triplet_set(rng, 25, 300)
        net, _ = train(feats, ts, None, TrainConfig(epochs=2, seed=5))
        p1 = tmp_path / "w.ccnn"
        p2 = tmp_path / "w2.ccnn"
        save_weights(net, p1)
        back = load_weights(p1)
        for w1, w2 in zip(net.weights, back.weights):
            assert np.array_equal(w1, w2)
        for b1, b2 in zip(net.biases, back.biases):
            assert np.array_equal(b1, b2)
        assert np.array_equal(net.feature_mean, back.feature_mean)
        assert np.array_equal(net.feature_scale, back.feature_scale)
        save_weights(back, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_mismatched_chain_rejected(self, rng, tmp_path):
        net = ChartingNetwork.initialize(NetworkConfig(input_dim=4, hidden_layers=(3,)))
        path = tmp_path / "w.ccnn"
        save_weights(net, path)
        buf = bytearray(path.read_bytes())
        # corrupt the second layer's fan_in header field (3 -> 7)
        offset = 12 + 8 + 4 * (4 * 3 + 3)
        buf[offset : offset + 4] = (7).to_bytes(4, "little")
        path.write_bytes(buf)
        with pytest.raises((NetworkError, Exception)):
            load_weights(path)

    def test_truncated_rejected(self, rng, tmp_path):
        net = ChartingNetwork.initialize(NetworkConfig(input_dim=4, hidden_layers=(3,)))
        path = tmp_path / "w.ccnn"
        save_weights(net, path)
        path.write_bytes(path.read_bytes()[:-7])
        with pytest.raises(Exception):
            load_weights(path)

    def test_transfer_uses_stored_normalization(self, rng, tmp_path):
        feats = rng.normal(loc=5.0, scale=3.0, size=(40, 4)).astype(np.float32)
        ts = random_triplet_set(rng, 40, 400)
        net, _ = train(feats, ts, None, TrainConfig(epochs=2, seed=1))
        path = tmp_path / "w.ccnn"
        save_weights(net, path)
        back = load_weights(path)
        other = rng.normal(loc=5.0, scale=3.0, size=(10, 4)).astype(np.float32)
        assert np.array_equal(map_features(net, other), map_features(back, other))


class TestNetworkConfig:
    def test_output_dim_fixed_at_two(self):
        with pytest.raises(NetworkError):
            NetworkConfig(input_dim=4, output_dim=3)

    def test_widths_validated(self):
        with pytest.raises(NetworkError):
            NetworkConfig(input_dim=4, hidden_layers=(0,))

    def test_margin_positive(self):
        with pytest.raises(NetworkError):
            TrainConfig(margin=0.0)

import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from resom.som import (
    SomGrid,
    TrainSchedule,
    activation_field,
    activity,
    decay,
    elect_bmu_wmu,
    grid_squared_distances,
    load_som,
    make_som,
    neighborhood,
    roundtrip_som,
    save_som,
    train,
)


class TestActivity:
    def test_identical_vectors(self):
        v = np.array([0.3, 0.7])
        assert activity(v, v, 1.0) == 1.0

    def test_three_four_five_triangle(self):
        # ||(0,0)-(3,4)|| = 5, non-squared in the exponent
        a = activity(np.array([0.0, 0.0]), np.array([3.0, 4.0]), 1.0)
        assert a == pytest.approx(math.exp(-5.0), rel=1e-12)
        assert a == pytest.approx(6.7379e-3, rel=1e-4)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            activity(np.zeros(2), np.zeros(3), 1.0)

    def test_kernel_width_must_be_positive(self):
        with pytest.raises(ValueError):
            activity(np.zeros(2), np.zeros(2), 0.0)


class TestElection:
    def test_tie_breaks_to_lowest_index(self):
        bmu, wmu = elect_bmu_wmu(np.array([0.2, 0.9, 0.9]))
        assert (bmu, wmu) == (1, 0)

    def test_singleton(self):
        assert elect_bmu_wmu(np.array([0.5])) == (0, 0)

    def test_empty_field(self):
        with pytest.raises(ValueError, match="empty"):
            elect_bmu_wmu(np.array([]))

    def test_matches_exhaustive_scan(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            acts = rng.random(100)
            best, worst = 0, 0
            for i in range(100):  # brute-force oracle
                if acts[i] > acts[best]:
                    best = i
                if acts[i] < acts[worst]:
                    worst = i
            assert elect_bmu_wmu(acts) == (best, worst)


class TestNeighborhood:
    def test_self(self):
        assert neighborhood((2, 3), (2, 3), sigma=5.0) == 1.0

    def test_adjacent_sigma_five(self):
        h = neighborhood((0, 0), (0, 1), sigma=5.0)
        assert h == pytest.approx(math.exp(-1 / 50), rel=1e-12)
        assert h == pytest.approx(0.9802, abs=1e-4)

    def test_two_cells_away_sigma_one(self):
        h = neighborhood((0, 0), (0, 2), sigma=1.0)
        assert h == pytest.approx(math.exp(-2.0), rel=1e-12)
        assert h == pytest.approx(0.1353, abs=1e-4)

    def test_manhattan_metric_squares_the_length(self):
        h = neighborhood((0, 0), (1, 1), sigma=1.0, grid_metric="manhattan")
        assert h == pytest.approx(math.exp(-4 / 2), rel=1e-12)

    def test_grid_table_agrees_with_scalar(self):
        dsq = grid_squared_distances(3, 2, "euclidean")
        assert dsq[0, 5] == (0 - 1) ** 2 + (0 - 2) ** 2
        dsq_m = grid_squared_distances(3, 2, "manhattan")
        assert dsq_m[0, 5] == (1 + 2) ** 2


class TestDecay:
    def test_boundaries(self):
        assert decay(0, 10, 1.0, 0.01) == 1.0
        assert decay(10, 10, 1.0, 0.01) == pytest.approx(0.01, rel=1e-12)

    def test_geometric_midpoint(self):
        assert decay(5, 10, 1.0, 0.01) == pytest.approx(0.1, rel=1e-12)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            decay(11, 10, 1.0, 0.01)

    @given(st.integers(1, 50), st.floats(0.011, 10.0), st.floats(1e-4, 0.01))
    def test_strictly_decreasing(self, t_final, v_start, v_end):
        values = [decay(t, t_final, v_start, v_end) for t in range(t_final + 1)]
        assert all(a > b for a, b in zip(values, values[1:]))


class TestSchedule:
    def test_validation(self):
        with pytest.raises(ValueError):
            TrainSchedule(epochs=0)
        with pytest.raises(ValueError):
            TrainSchedule(lr_start=0.01, lr_end=1.0)
        with pytest.raises(ValueError):
            TrainSchedule(sigma_end=0.0)


class TestTrain:
    schedule = TrainSchedule(epochs=5, lr_start=0.5, lr_end=0.05, sigma_start=1.0, sigma_end=0.1)

    def test_deterministic(self):
        rng = np.random.default_rng(1)
        X = rng.random((50, 4))
        s = make_som(3, 3, 4, seed=2)
        a = train(s, X, self.schedule, seed=7)
        b = train(s, X, self.schedule, seed=7)
        assert np.array_equal(a.weights, b.weights)

    def test_weights_stay_in_unit_hull(self):
        rng = np.random.default_rng(3)
        X = rng.random((200, 6))
        s = make_som(4, 4, 6, seed=0)
        schedule = TrainSchedule(epochs=3, lr_start=1.0, lr_end=0.01)
        out = train(s, X, schedule, seed=1)
        assert out.weights.min() >= 0.0 and out.weights.max() <= 1.0

    def test_bmu_stability(self):
        s = train(
            make_som(3, 3, 5, seed=4),
            np.random.default_rng(4).random((80, 5)),
            self.schedule,
            seed=4,
        )
        for n in range(s.n_neurons):
            field = activation_field(s, s.weights[n], kernel_width=1.0)
            # its own weight elects the neuron, or an exact duplicate earlier
            assert field.bmu <= n
            assert np.array_equal(s.weights[field.bmu], s.weights[n])

    def test_single_neuron_tracks_mean(self):
        rng = np.random.default_rng(5)
        X = 0.6 + 0.05 * rng.standard_normal((400, 3))
        schedule = TrainSchedule(epochs=10, lr_start=0.5, lr_end=0.01)
        out = train(make_som(1, 1, 3, seed=0), X, schedule, seed=0)
        np.testing.assert_allclose(out.weights[0], X.mean(axis=0), atol=0.05)

    def test_two_neurons_split_two_clusters(self):
        rng = np.random.default_rng(6)
        a = 0.1 + 0.03 * rng.random((150, 2))
        b = 0.9 - 0.03 * rng.random((150, 2))
        X = np.vstack([a, b])
        schedule = TrainSchedule(epochs=20, lr_start=0.5, lr_end=0.01,
                                 sigma_start=0.5, sigma_end=0.05)
        out = train(make_som(2, 1, 2, seed=1), X, schedule, seed=1)

        # brute-force 2-means oracle on the same data
        centers = np.array([a[0], b[0]])
        for _ in range(50):
            owner = np.argmin(
                ((X[:, None, :] - centers[None]) ** 2).sum(-1), axis=1
            )
            centers = np.array([X[owner == j].mean(axis=0) for j in (0, 1)])

        cost = np.linalg.norm(out.weights[:, None, :] - centers[None], axis=-1)
        assignment = np.argmin(cost, axis=1)
        assert set(assignment) == {0, 1}  # one neuron per cluster
        assert cost[np.arange(2), assignment].max() < 0.08

    def test_training_election_equals_activity_election(self):
        # raw-distance argmin and activity argmax elect the same neuron
        rng = np.random.default_rng(7)
        for _ in range(300):
            d = rng.random(32) * rng.choice([0.1, 1.0, 10.0])
            by_distance = int(np.argmin(d))
            by_activity = int(np.argmax(np.exp(-d)))
            assert by_distance == by_activity

    def test_rejects_bad_input(self):
        s = make_som(2, 2, 3, seed=0)
        with pytest.raises(ValueError, match="empty"):
            train(s, np.empty((0, 3)), self.schedule, seed=0)
        with pytest.raises(ValueError, match="dim"):
            train(s, np.zeros((5, 4)), self.schedule, seed=0)


class TestCheckpoint:
    def test_roundtrip_with_labels(self, tmp_path):
        s = make_som(3, 2, 4, seed=8)
        s.labels = np.array([0, 1, 2, 0, 1, 2])
        path = tmp_path / "map.rsom"
        save_som(s, path)
        back = load_som(path)
        assert (back.width, back.height, back.dim) == (3, 2, 4)
        np.testing.assert_allclose(back.weights, s.weights, atol=1e-7)  # f32 storage
        assert np.array_equal(back.labels, s.labels)

    def test_roundtrip_is_f32_stable(self):
        s = make_som(2, 2, 3, seed=9)
        once = roundtrip_som(s)
        twice = roundtrip_som(once)
        assert np.array_equal(once.weights, twice.weights)

    def test_bad_magic(self):
        with pytest.raises(ValueError, match="magic"):
            load_som(io.BytesIO(b"XXXX" + b"\x00" * 32))

    def test_grid_shape_validation(self):
        with pytest.raises(ValueError, match="weight rows"):
            SomGrid(2, 2, np.zeros((3, 4)))
        with pytest.raises(ValueError, match="label"):
            SomGrid(2, 1, np.zeros((2, 4)), labels=np.array([1]))

import numpy as np
import pytest

from resom.grid import (
    CellSummary,
    cost_report,
    ig_train,
    ig_train_epoch,
    merge_summaries,
    propagation_steps,
    wave_trace,
    winner_wave,
    winner_wave_cellwise,
    _wave_init,
    _wave_step,
)
from resom.som import TrainSchedule, make_som, train


def oracle(activities):
    """Centralized election + true Manhattan distances."""
    a = np.asarray(activities)
    flat = a.ravel()
    bmu, wmu = int(np.argmax(flat)), int(np.argmin(flat))
    rows, cols = np.indices(a.shape)
    br, bc = divmod(bmu, a.shape[1])
    return bmu, wmu, np.abs(rows - br) + np.abs(cols - bc)


class TestPropagationSteps:
    def test_formula(self):
        assert propagation_steps(10, 10) == 18
        assert propagation_steps(1, 1) == 0
        assert propagation_steps(3, 5) == 6

    def test_doubling_one_side(self):
        assert propagation_steps(8, 20) - propagation_steps(8, 10) == 10

    def test_square_grid_is_sqrt_n(self):
        for k in (2, 4, 8, 16):
            assert propagation_steps(k, k) == 2 * k - 2  # O(sqrt(n)) for n = k^2


class TestWinnerWave:
    def test_single_cell(self):
        res = winner_wave(np.array([[0.4]]))
        assert res.steps == 0
        assert res.bmu_index == res.wmu_index == 0
        assert res.distance_to_bmu[0, 0] == 0

    def test_exactness_small_grids(self):
        rng = np.random.default_rng(0)
        for rows in range(1, 6):
            for cols in range(1, 6):
                for _ in range(50):
                    a = rng.random((rows, cols))
                    bmu, wmu, dist = oracle(a)
                    res = winner_wave(a)
                    assert res.bmu_index == bmu
                    assert res.wmu_index == wmu
                    assert np.array_equal(res.distance_to_bmu, dist)
                    assert np.all(res.best_values == a.ravel()[bmu])
                    assert np.all(res.worst_values == a.ravel()[wmu])

    def test_duplicate_maxima_break_to_lowest_row_major_index(self):
        a = np.zeros((3, 3))
        a[2, 2] = a[0, 1] = 1.0  # two equal maxima
        res = winner_wave(a)
        assert res.bmu_index == 1
        # all-equal minima tie-break to cell 0
        assert res.wmu_index == 0

    def test_constant_field(self):
        res = winner_wave(np.full((4, 4), 0.5))
        assert res.bmu_index == 0 and res.wmu_index == 0
        bmu, wmu, dist = oracle(np.full((4, 4), 0.5))
        assert np.array_equal(res.distance_to_bmu, dist)

    def test_best_never_below_own_activity(self):
        rng = np.random.default_rng(1)
        a = rng.random((6, 7))
        res = winner_wave(a)
        assert (res.best_values >= a).all()
        assert (res.distance_to_bmu <= res.steps).all()

    def test_rejects_non_grid(self):
        with pytest.raises(ValueError, match="rectangular"):
            winner_wave(np.zeros(5))


class TestCellwiseReference:
    def test_matches_vectorized(self):
        rng = np.random.default_rng(2)
        for shape in ((1, 1), (2, 5), (4, 4), (5, 3)):
            for _ in range(10):
                a = rng.random(shape)
                fast = winner_wave(a)
                slow = winner_wave_cellwise(a)
                assert fast.bmu_index == slow.bmu_index
                assert fast.wmu_index == slow.wmu_index
                assert np.array_equal(fast.distance_to_bmu, slow.distance_to_bmu)

    def test_iteration_order_irrelevant(self):
        rng = np.random.default_rng(3)
        a = rng.random((4, 5))
        cells = [(r, c) for r in range(4) for c in range(5)]
        natural = winner_wave_cellwise(a)
        for _ in range(5):
            rng.shuffle(cells)
            shuffled = winner_wave_cellwise(a, cell_order=list(cells))
            assert np.array_equal(natural.best_origins, shuffled.best_origins)
            assert np.array_equal(natural.distance_to_bmu, shuffled.distance_to_bmu)

    def test_merge_prefers_value_then_origin(self):
        a = CellSummary(0.5, 7, 0.5, 7)
        b = CellSummary(0.5, 3, 0.4, 9)
        merged = merge_summaries(a, b)
        assert merged.best_origin == 3  # tie on value, lower origin
        assert merged.worst_value == 0.4 and merged.worst_origin == 9


class TestLocality:
    def test_information_travels_one_hop_per_step(self):
        # perturbing one cell cannot affect cells farther than s hops in s steps
        rng = np.random.default_rng(4)
        a = rng.random((6, 6))
        b = a.copy()
        b[2, 3] = 10.0  # perturbation source
        rows, cols = np.indices(a.shape)
        hop = np.abs(rows - 2) + np.abs(cols - 3)
        state_a, state_b = _wave_init(a), _wave_init(b)
        for step in range(1, propagation_steps(6, 6) + 1):
            state_a = _wave_step(state_a, step)
            state_b = _wave_step(state_b, step)
            untouched = hop > step
            assert np.array_equal(
                state_a["best_values"][untouched], state_b["best_values"][untouched]
            )
            assert np.array_equal(
                state_a["best_origins"][untouched], state_b["best_origins"][untouched]
            )


class TestTrace:
    def test_trace_covers_every_step_and_cell(self):
        a = np.random.default_rng(5).random((3, 4))
        rows = wave_trace(a)
        t_p = propagation_steps(3, 4)
        assert len(rows) == (t_p + 1) * 12
        final = [r for r in rows if r["step"] == t_p]
        res = winner_wave(a)
        for r in final:
            assert r["adopt_step"] == res.distance_to_bmu[r["row"], r["col"]]


class TestCellularTraining:
    def test_bit_identical_to_centralized_manhattan(self):
        rng = np.random.default_rng(6)
        X = rng.random((20, 5))
        som = make_som(4, 4, 5, seed=11)
        schedule = TrainSchedule(epochs=4, lr_start=0.8, lr_end=0.05,
                                 sigma_start=2.0, sigma_end=0.2)
        central = train(som, X, schedule, seed=3, grid_metric="manhattan")
        cellular = ig_train(som, X, schedule, seed=3)
        assert np.array_equal(central.weights, cellular.weights)

    def test_row_reduction_matches_per_cell_sum(self):
        # the two training paths rely on identical per-row square sums
        rng = np.random.default_rng(7)
        A = rng.random((64, 300))
        per_row = np.array([np.sum(A[i] * A[i]) for i in range(64)])
        assert np.array_equal(per_row, np.sum(A * A, axis=1))

    def test_epoch_step_accounting(self):
        rng = np.random.default_rng(8)
        som = make_som(3, 4, 2, seed=0)
        samples = rng.random((7, 2))
        _, steps = ig_train_epoch(som, samples, lr=0.1, sigma=1.0)
        assert steps == 7 * (propagation_steps(4, 3) + 1)  # wave + local learn

    def test_tiny_sigma_updates_only_the_bmu(self):
        rng = np.random.default_rng(9)
        som = make_som(3, 3, 4, seed=1)
        v = rng.random((1, 4))
        for result in (
            ig_train_epoch(som, v, lr=0.5, sigma=1e-4)[0],
            train(som, v, TrainSchedule(1, 0.5, 0.5, 1e-4, 1e-4), seed=0,
                  grid_metric="manhattan"),
        ):
            changed = np.flatnonzero(np.any(result.weights != som.weights, axis=1))
            diff = v[0] - som.weights
            bmu = int(np.argmin(np.sqrt(np.sum(diff * diff, axis=1))))
            assert changed.tolist() == [bmu]

    def test_dimension_mismatch(self):
        som = make_som(2, 2, 3, seed=0)
        with pytest.raises(ValueError, match="dim"):
            ig_train(som, np.zeros((4, 5)), TrainSchedule(1), seed=0)


class TestCostReport:
    def test_counts(self):
        rep = cost_report(10, 10, n_samples=3)
        assert rep.t_p == 18
        assert rep.steps_per_sample == 19
        assert rep.total_steps == 57
        edges = 10 * 9 + 10 * 9
        assert rep.messages_per_step == 2 * edges
        assert rep.messages_per_wave == 2 * edges * 18
        assert rep.messages_per_wave < rep.message_upper_bound  # boundary deficit
        assert rep.centralized_ops_per_sample == 100

    def test_sqrt_scaling(self):
        for k in (4, 8, 16, 32):
            rep = cost_report(k, k, 1)
            assert rep.t_p == 2 * k - 2
            assert rep.t_p < rep.centralized_ops_per_sample  # O(sqrt n) vs O(n)

    def test_single_cell(self):
        rep = cost_report(1, 1, 5)
        assert rep.messages_per_wave == 0 and rep.t_p == 0

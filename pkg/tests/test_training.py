"""Tests for the weight-computation procedures."""

import math

import numpy as np
import pytest

from nladpcm import training
from nladpcm.dsp import autocorrelation, levinson_durbin
from nladpcm.errors import ConfigError, DegenerateFrameError
from nladpcm.mlp import N_WEIGHTS, MlpWeights, forward, forward_batch, init_random
from nladpcm.training import (
    Dataset,
    TrainConfig,
    committee_predict,
    make_dataset,
    mse,
    msereg,
    multi_start,
    train_bayes,
    train_lm,
    train_with_validation,
)


def _ar2_frame(seed=11, n=200, coeffs=(0.9, -0.2), noise_std=0.1):
    rng = np.random.default_rng(seed)
    x = np.zeros(n + 2)
    noise = rng.normal(0.0, noise_std, size=n + 2)
    for i in range(2, n + 2):
        x[i] = coeffs[0] * x[i - 1] + coeffs[1] * x[i - 2] + noise[i]
    return x[2:]


@pytest.fixture(scope="module")
def ar2_dataset():
    return make_dataset(_ar2_frame(), 10)


class TestMakeDataset:
    def test_pair_count(self):
        ds = make_dataset(np.linspace(-0.5, 0.5, 200), 10)
        assert len(ds) == 190

    def test_constant_frame(self):
        ds = make_dataset(np.full(50, 0.25), 10)
        assert np.all(ds.targets == 0.25)
        assert np.all(ds.inputs == 0.25)

    def test_sliding_window_overlap(self):
        ds = make_dataset(np.arange(30.0), 10)
        np.testing.assert_array_equal(ds.inputs[0][1:], ds.inputs[1][:9])
        assert ds.targets[0] == ds.inputs[1][-1]

    def test_most_recent_last(self):
        ds = make_dataset(np.arange(30.0), 10)
        np.testing.assert_array_equal(ds.inputs[0], np.arange(10.0))
        assert ds.targets[0] == 10.0

    def test_too_short_frame(self):
        with pytest.raises(DegenerateFrameError):
            make_dataset(np.zeros(10), 10)

    def test_sample_access(self):
        ds = make_dataset(np.arange(30.0), 10)
        sample = ds[3]
        np.testing.assert_array_equal(sample.input, np.arange(3.0, 13.0))
        assert sample.target == 13.0


class TestPerformanceFunctions:
    def test_mse_zeros(self):
        assert mse(np.zeros(5)) == 0.0

    def test_mse_plus_minus_one(self):
        assert mse(np.array([1.0, -1.0])) == 1.0

    def test_mse_matches_loop(self):
        rng = np.random.default_rng(3)
        e = rng.normal(0, 1, 57)
        expected = sum(v * v for v in e) / 57
        assert mse(e) == pytest.approx(expected, abs=1e-12)

    def test_msereg_gamma_one_is_mse_exactly(self):
        rng = np.random.default_rng(5)
        e = rng.normal(0, 1, 20)
        w = MlpWeights.from_flat(rng.normal(0, 1, N_WEIGHTS))
        assert msereg(e, w, 1.0) == mse(e)

    def test_msereg_gamma_zero(self):
        w = MlpWeights.from_flat(np.full(N_WEIGHTS, 0.5))
        assert msereg(np.array([123.0]), w, 0.0) == pytest.approx(0.25, abs=1e-15)

    def test_msereg_worked_example(self):
        """gamma=0.9, e=[0.1], w=e_1: 0.9*0.01 + 0.1*(1/25) = 0.013."""
        flat = np.zeros(N_WEIGHTS)
        flat[0] = 1.0
        value = msereg(np.array([0.1]), MlpWeights.from_flat(flat), 0.9)
        assert value == 0.9 * 0.01 + 0.1 * (1.0 / 25.0)
        assert value == pytest.approx(0.013, rel=1e-12)

    def test_msereg_zero_weights_scales_mse_exactly(self):
        e = np.array([0.3, -0.7, 0.2])
        for gamma in (0.0, 0.25, 0.9):
            assert msereg(e, MlpWeights.zeros(), gamma) == gamma * mse(e)


class TestTrainLm:
    def test_reaches_linear_optimum_on_ar2(self, ar2_dataset):
        """50 LM epochs on AR(2) pairs must match the order-2 linear optimum
        obtained independently via Levinson-Durbin."""
        cfg = TrainConfig(algorithm="lm", performance="mse", epochs=50)
        _, diag = train_lm(ar2_dataset, init_random(5, 0), cfg)
        frame = _ar2_frame()
        lpc2 = levinson_durbin(autocorrelation(frame, 2), 2)
        linear_pred = ar2_dataset.inputs[:, -2:] @ lpc2.a[::-1]
        linear_mse = mse(ar2_dataset.targets - linear_pred)
        assert diag.final_mse <= linear_mse + 1e-3

    def test_zero_targets_zero_init_is_stationary(self):
        ds = Dataset(inputs=np.zeros((40, 10)), targets=np.zeros(40))
        cfg = TrainConfig(epochs=10)
        w, diag = train_lm(ds, MlpWeights.zeros(), cfg)
        np.testing.assert_array_equal(w.flatten(), np.zeros(N_WEIGHTS))
        assert diag.final_mse == 0.0
        assert diag.stop_epoch == 0

    def test_accepted_steps_strictly_decrease(self, ar2_dataset):
        for performance, algorithm in (("mse", "lm"), ("msereg", "lm")):
            cfg = TrainConfig(algorithm=algorithm, performance=performance, epochs=25)
            _, diag = train_lm(ar2_dataset, init_random(9, 1), cfg)
            for before, after in diag.step_pairs:
                assert after < before
            trace = diag.perf_trace
            assert all(b <= a for a, b in zip(trace, trace[1:]))

    def test_msereg_shrinks_weights(self, ar2_dataset):
        cfg_plain = TrainConfig(performance="mse", epochs=30)
        cfg_reg = TrainConfig(performance="msereg", gamma=0.5, epochs=30)
        w_plain, _ = train_lm(ar2_dataset, init_random(2, 0), cfg_plain)
        w_reg, _ = train_lm(ar2_dataset, init_random(2, 0), cfg_reg)
        assert np.sum(w_reg.flatten() ** 2) < np.sum(w_plain.flatten() ** 2)

    def test_deterministic(self, ar2_dataset):
        cfg = TrainConfig(epochs=12)
        w1, d1 = train_lm(ar2_dataset, init_random(3, 2), cfg)
        w2, d2 = train_lm(ar2_dataset, init_random(3, 2), cfg)
        np.testing.assert_array_equal(w1.flatten(), w2.flatten())
        assert d1.perf_trace == d2.perf_trace


class TestTrainBayes:
    def test_gamma_eff_in_open_interval(self, ar2_dataset):
        cfg = TrainConfig(algorithm="br", performance="msereg", epochs=40)
        _, diag = train_bayes(ar2_dataset, init_random(7, 0), cfg)
        assert diag.hyper_trace
        for alpha, beta, gamma_eff in diag.hyper_trace:
            assert 0.0 < gamma_eff < 25.0
            assert alpha > 0.0 and beta > 0.0

    def test_noise_targets_use_fewer_parameters(self, ar2_dataset):
        """Unlearnable targets should keep the effective parameter count
        below the one reached on structured AR(2) data."""
        rng = np.random.default_rng(19)
        noise_ds = Dataset(
            inputs=rng.uniform(-0.5, 0.5, (190, 10)),
            targets=rng.uniform(-0.5, 0.5, 190),
        )
        cfg = TrainConfig(algorithm="br", performance="msereg", epochs=40)
        _, d_noise = train_bayes(noise_ds, init_random(7, 0), cfg)
        _, d_ar = train_bayes(ar2_dataset, init_random(7, 0), cfg)
        assert d_noise.hyper_trace[-1][2] < d_ar.hyper_trace[-1][2]

    def test_matches_lm_fit_with_smaller_weights(self):
        """Paired run on a resonant AR(2): E_D within 10% of plain LM at 50
        epochs while E_W does not exceed it."""
        ds = make_dataset(_ar2_frame(seed=11, coeffs=(1.6, -0.81), noise_std=0.05), 10)
        cfg_lm = TrainConfig(algorithm="lm", performance="mse", epochs=50)
        cfg_br = TrainConfig(algorithm="br", performance="msereg", epochs=50)
        w_lm, d_lm = train_lm(ds, init_random(5, 0), cfg_lm)
        w_br, d_br = train_bayes(ds, init_random(5, 0), cfg_br)
        e_d_lm = d_lm.final_mse * len(ds)
        e_d_br = d_br.final_mse * len(ds)
        assert abs(e_d_br - e_d_lm) <= 0.10 * e_d_lm
        assert np.sum(w_br.flatten() ** 2) <= np.sum(w_lm.flatten() ** 2)

    def test_implied_ratio_recorded(self, ar2_dataset):
        cfg = TrainConfig(algorithm="br", epochs=10)
        _, diag = train_bayes(ar2_dataset, init_random(1, 0), cfg)
        assert len(diag.implied_ratio_trace) == len(diag.hyper_trace)
        assert all(0.0 < r < 1.0 for r in diag.implied_ratio_trace)

    def test_per_step_objective_decreases(self, ar2_dataset):
        cfg = TrainConfig(algorithm="br", epochs=30)
        _, diag = train_bayes(ar2_dataset, init_random(4, 0), cfg)
        for before, after in diag.step_pairs:
            assert after < before


class TestTrainWithValidation:
    def test_val_equals_train_mirrors_base(self, ar2_dataset):
        cfg = TrainConfig(performance="mse", epochs=15, patience=15)
        init = init_random(6, 0)
        w_base, _ = train_lm(ar2_dataset, init, cfg)
        w_val, diag = train_with_validation(ar2_dataset, ar2_dataset, cfg, init)
        np.testing.assert_array_equal(w_val.flatten(), w_base.flatten())
        assert diag.best_val_epoch == diag.stop_epoch

    def test_immediately_rising_validation_stops_at_epoch_one(self, ar2_dataset):
        """Validation targets opposing the training targets make validation
        error rise from epoch 1; with patience=1 the epoch-1 snapshot wins."""
        val = Dataset(inputs=ar2_dataset.inputs, targets=-3.0 * ar2_dataset.targets)
        cfg = TrainConfig(performance="mse", epochs=30, patience=1)
        init = init_random(6, 1)
        w, diag = train_with_validation(ar2_dataset, val, cfg, init)
        assert all(b > a for a, b in zip(diag.val_trace, diag.val_trace[1:]))
        assert diag.best_val_epoch == 1
        w_one, _ = train_lm(ar2_dataset, init, TrainConfig(performance="mse", epochs=1))
        np.testing.assert_array_equal(w.flatten(), w_one.flatten())

    def test_returns_argmin_of_validation_trace(self, ar2_dataset):
        """Replay check: the returned snapshot reproduces the recorded
        validation minimum exactly."""
        rng = np.random.default_rng(23)
        val = Dataset(
            inputs=ar2_dataset.inputs,
            targets=ar2_dataset.targets + rng.normal(0, 0.3, len(ar2_dataset)),
        )
        cfg = TrainConfig(performance="mse", epochs=40, patience=4)
        w, diag = train_with_validation(ar2_dataset, val, cfg, init_random(6, 2))
        assert diag.val_trace
        best = int(np.argmin(diag.val_trace))
        assert diag.best_val_epoch == best + 1
        replay = mse(val.targets - forward_batch(w, val.inputs))
        assert replay == diag.val_trace[best]

    def test_works_with_bayes_base(self, ar2_dataset):
        cfg = TrainConfig(algorithm="br", epochs=10, patience=3)
        w, diag = train_with_validation(ar2_dataset, ar2_dataset, cfg, init_random(6, 3))
        assert np.all(np.isfinite(w.flatten()))
        assert diag.hyper_trace


class TestMultiStart:
    def test_single_start_equals_plain_training(self, ar2_dataset):
        cfg = TrainConfig(epochs=8, n_starts=1)
        predictor = multi_start(ar2_dataset, cfg, rng_seed=42, frame_index=3)
        w_direct, _ = train_lm(ar2_dataset, init_random(42, 0, frame_index=3), cfg)
        assert predictor.kind == "single"
        np.testing.assert_array_equal(predictor.members[0].flatten(), w_direct.flatten())

    def test_selection_matches_exhaustive_comparison(self, ar2_dataset):
        cfg = TrainConfig(epochs=6, n_starts=5)
        predictor = multi_start(ar2_dataset, cfg, rng_seed=7, frame_index=2)
        finals = []
        for idx in range(5):
            _, diag = train_lm(ar2_dataset, init_random(7, idx, frame_index=2), cfg)
            finals.append(diag.final_perf)
        assert predictor.selected_index == int(np.argmin(finals))

    def test_tie_breaks_to_lowest_index(self, ar2_dataset, monkeypatch):
        diag = training.TrainDiagnostics(final_perf=0.5, final_mse=0.5)
        monkeypatch.setattr(
            training, "_train_one", lambda data, init, cfg, val_data=None: (init, diag)
        )
        cfg = TrainConfig(epochs=1, n_starts=3)
        predictor = multi_start(ar2_dataset, cfg, rng_seed=1, frame_index=0)
        assert predictor.selected_index == 0

    def test_all_diverged_falls_back_to_zero(self, ar2_dataset, monkeypatch):
        diag = training.TrainDiagnostics(final_perf=float("nan"), final_mse=float("nan"))
        monkeypatch.setattr(
            training, "_train_one", lambda data, init, cfg, val_data=None: (init, diag)
        )
        cfg = TrainConfig(epochs=1, n_starts=3)
        predictor = multi_start(ar2_dataset, cfg, rng_seed=1, frame_index=0)
        assert predictor.fallback_zero
        np.testing.assert_array_equal(predictor.members[0].flatten(), np.zeros(N_WEIGHTS))

    def test_committee_keeps_all_members(self, ar2_dataset):
        cfg = TrainConfig(epochs=4, n_starts=5, selection="committee_median")
        predictor = multi_start(ar2_dataset, cfg, rng_seed=3, frame_index=1)
        assert predictor.kind == "committee"
        assert predictor.fusion == "median"
        assert len(predictor.members) == 5

    def test_deterministic_predictor(self, ar2_dataset):
        cfg = TrainConfig(epochs=5, n_starts=5, selection="committee_mean")
        a = multi_start(ar2_dataset, cfg, rng_seed=9, frame_index=4)
        b = multi_start(ar2_dataset, cfg, rng_seed=9, frame_index=4)
        for ma, mb in zip(a.members, b.members):
            np.testing.assert_array_equal(ma.flatten(), mb.flatten())


class TestCommitteePredict:
    def test_identical_members(self):
        rng = np.random.default_rng(3)
        w = MlpWeights.from_flat(rng.normal(0, 1, N_WEIGHTS))
        x = rng.uniform(-1, 1, 10)
        single = forward(w, x)
        assert committee_predict([w] * 5, "mean", x) == pytest.approx(single, abs=1e-15)
        assert committee_predict([w] * 5, "median", x) == pytest.approx(single, abs=1e-15)

    def test_outlier_robustness(self):
        """Outputs {0.1 x4, 50}: median 0.1, mean 10.08."""
        members = []
        for value in (0.1, 0.1, 0.1, 0.1, 50.0):
            members.append(MlpWeights(w1=np.zeros((2, 10)), b1=np.zeros(2),
                                      w2=np.zeros(2), b2=value))
        x = np.zeros(10)
        assert committee_predict(members, "median", x) == pytest.approx(0.1)
        assert committee_predict(members, "mean", x) == pytest.approx(10.08)

    def test_matches_sort_sum_oracle(self):
        rng = np.random.default_rng(7)
        members = [MlpWeights.from_flat(rng.normal(0, 1, N_WEIGHTS)) for _ in range(5)]
        x = rng.uniform(-1, 1, 10)
        outputs = sorted(forward(m, x) for m in members)
        assert committee_predict(members, "median", x) == pytest.approx(outputs[2], abs=1e-12)
        assert committee_predict(members, "mean", x) == pytest.approx(
            sum(outputs) / 5, abs=1e-12
        )

    def test_even_count_median_averages_middle(self):
        members = []
        for value in (0.0, 1.0, 2.0, 10.0):
            members.append(MlpWeights(w1=np.zeros((2, 10)), b1=np.zeros(2),
                                      w2=np.zeros(2), b2=value))
        assert committee_predict(members, "median", np.zeros(10)) == pytest.approx(1.5)

    def test_permutation_invariant_and_bounded(self):
        rng = np.random.default_rng(11)
        members = [MlpWeights.from_flat(rng.normal(0, 1, N_WEIGHTS)) for _ in range(5)]
        x = rng.uniform(-1, 1, 10)
        outputs = [forward(m, x) for m in members]
        base = committee_predict(members, "median", x)
        for _ in range(5):
            perm = list(rng.permutation(5))
            assert committee_predict([members[i] for i in perm], "median", x) == base
        assert min(outputs) <= base <= max(outputs)

    def test_empty_committee_rejected(self):
        with pytest.raises(ValueError):
            committee_predict([], "mean", np.zeros(10))


class TestTrainConfig:
    def test_canonical_roundtrip(self):
        cfg = TrainConfig(algorithm="br", performance="msereg", gamma=0.7, epochs=50,
                          selection="committee_median", validation=True)
        assert TrainConfig.from_canonical(cfg.to_canonical()) == cfg

    def test_invalid_values_rejected(self):
        with pytest.raises(ConfigError):
            TrainConfig(gamma=1.5)
        with pytest.raises(ConfigError):
            TrainConfig(epochs=0)
        with pytest.raises(ConfigError):
            TrainConfig(algorithm="sgd")
        with pytest.raises(ConfigError):
            TrainConfig(mu0=-1.0)

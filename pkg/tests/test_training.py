import numpy as np
import pytest

from crosskws import tensor as T
from crosskws import training
from crosskws.corpus import synth_toy_corpus
from crosskws.losses import LossWeights
from crosskws.model import init_params
from crosskws.training import AdamState, TrainConfig, adam_step


@pytest.fixture(scope="module")
def tiny_corpus():
    return synth_toy_corpus(4, 4, seed=11)


class TestAdamStep:
    def test_zero_grads_no_change(self):
        params = init_params(0)
        before = {n: params[n].data.copy() for n in params.names()}
        grads = {n: np.zeros_like(params[n].data) for n in params.names()}
        adam_step(params, grads, AdamState())
        for n in params.names():
            assert np.array_equal(params[n].data, before[n])

    def test_zero_lr_no_change(self):
        params = init_params(1)
        rng = np.random.default_rng(0)
        grads = {n: rng.normal(size=params[n].data.shape) for n in params.names()}
        before = {n: params[n].data.copy() for n in params.names()}
        adam_step(params, grads, AdamState(), lr=0.0)
        for n in params.names():
            assert np.array_equal(params[n].data, before[n])

    def test_first_step_magnitude_near_lr(self):
        params = init_params(2)
        grads = {n: np.full_like(params[n].data, 0.37) for n in params.names()}
        before = {n: params[n].data.copy() for n in params.names()}
        lr = 1e-3
        adam_step(params, grads, AdamState(), lr=lr)
        for n in params.names():
            delta = np.abs(params[n].data - before[n])
            # bias correction makes the first update lr * g/|g| up to eps
            assert np.allclose(delta, lr, rtol=1e-4)

    def test_shape_mismatch(self):
        params = init_params(3)
        grads = {"conv1_w": np.zeros((1, 2, 3))}
        with pytest.raises(T.ShapeError):
            adam_step(params, grads, AdamState())

    def test_state_persists_across_steps(self):
        params = init_params(4)
        state = AdamState()
        grads = {n: np.ones_like(params[n].data) for n in params.names()}
        adam_step(params, grads, state)
        assert state.t == 1
        adam_step(params, grads, state)
        assert state.t == 2


class TestTrainLoop:
    def test_loss_decreases(self, tiny_corpus):
        cfg = TrainConfig(steps=60, batch_size=2, seed=11, embed_dim=16)
        _, logs = training.train(tiny_corpus.train_pairs, cfg)
        head = np.mean([l.total for l in logs[:6]])
        tail = np.mean([l.total for l in logs[-6:]])
        assert tail < head

    def test_deterministic(self, tiny_corpus):
        cfg = TrainConfig(steps=12, batch_size=2, seed=5, embed_dim=16)
        p1, logs1 = training.train(tiny_corpus.train_pairs, cfg)
        p2, logs2 = training.train(tiny_corpus.train_pairs, cfg)
        assert logs1[-1].total == logs2[-1].total
        for n in p1.names():
            assert np.array_equal(p1[n].data, p2[n].data)

    def test_phase_switch_at_floor(self, tiny_corpus):
        steps = 10
        cfg = TrainConfig(steps=steps, batch_size=1, seed=1, embed_dim=16,
                          weights=LossWeights(switch_fraction=0.5))
        _, logs = training.train(tiny_corpus.train_pairs, cfg)
        switch_step = int(np.floor(0.5 * steps))
        for row in logs:
            want = "bce" if row.step < switch_step else "focal"
            assert row.phase == want

    def test_zero_lambdas_reduce_to_detection(self, tiny_corpus):
        w = LossWeights(lambda_denoise=0.0, lambda_match=0.0)
        cfg = TrainConfig(steps=4, batch_size=1, seed=2, embed_dim=16, weights=w)
        _, logs = training.train(tiny_corpus.train_pairs, cfg)
        for row in logs:
            assert row.total == pytest.approx(row.l_d, abs=1e-12)
            assert row.l_dn >= 0.0 and row.l_mm >= 0.0  # still logged

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValueError):
            training.train([], TrainConfig(steps=1))

    def test_bad_config(self):
        with pytest.raises(ValueError):
            TrainConfig(steps=0)
        with pytest.raises(ValueError):
            TrainConfig(batch_size=0)
        with pytest.raises(ValueError):
            TrainConfig(learning_rate=0.0)
        with pytest.raises(ValueError):
            TrainConfig(snr_low=10.0, snr_high=5.0)


class TestEvaluate:
    def test_report_fields(self, tiny_corpus):
        cfg = TrainConfig(steps=8, batch_size=2, seed=3, embed_dim=16)
        params, _ = training.train(tiny_corpus.train_pairs, cfg)
        report = training.evaluate(params, tiny_corpus.eval_episodes)
        assert 0.0 <= report.eer <= 1.0
        assert 0.0 <= report.auc <= 1.0
        assert report.n_scores == sum(
            len(e.positives) + len(e.negatives) for e in tiny_corpus.eval_episodes)
        assert set(report.by_length) == {1, 2, 3, 4}

    def test_empty_episodes_rejected(self):
        params = init_params(0, training.ModelConfig(embed_dim=16))
        with pytest.raises(ValueError):
            training.evaluate(params, [])


class TestMetricsCsv:
    def test_format(self, tmp_path, tiny_corpus):
        cfg = TrainConfig(steps=3, batch_size=1, seed=4, embed_dim=16)
        _, logs = training.train(tiny_corpus.train_pairs, cfg)
        path = tmp_path / "m.csv"
        training.write_metrics_csv(path, logs)
        lines = path.read_text().strip().split("\n")
        assert lines[0] == "step,l_dn,l_mm,l_d,total,phase"
        assert len(lines) == 4
        first = lines[1].split(",")
        assert first[0] == "0"
        assert first[5] in ("bce", "focal")
        assert float(first[4]) == pytest.approx(logs[0].total)

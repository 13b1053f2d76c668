import numpy as np
import pytest

from asrnoise import corpus as C
from asrnoise import model as M
from asrnoise import training as T
from asrnoise.errors import CorruptCheckpointError, VersionMismatchError


class TestTrainConfig:
    def test_zero_epochs_rejected(self):
        with pytest.raises(ValueError):
            T.TrainConfig(epochs=0)

    def test_zero_learning_rate_rejected(self):
        with pytest.raises(ValueError):
            T.TrainConfig(learning_rate=0.0)

    def test_bad_batch_and_clip_rejected(self):
        with pytest.raises(ValueError):
            T.TrainConfig(batch_size=0)
        with pytest.raises(ValueError):
            T.TrainConfig(clip_norm=0.0)


class TestClipGradients:
    def test_never_increases_norm(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            grads = {k: rng.normal(size=(4, 4)) * rng.uniform(0.1, 30) for k in "ab"}
            before = np.sqrt(sum((g**2).sum() for g in grads.values()))
            returned = T.clip_gradients(grads, 5.0)
            after = np.sqrt(sum((g**2).sum() for g in grads.values()))
            assert returned == pytest.approx(before)
            assert after <= min(before, 5.0) + 1e-12

    def test_small_gradients_untouched(self):
        grads = {"a": np.full((2,), 0.1)}
        T.clip_gradients(grads, 5.0)
        np.testing.assert_array_equal(grads["a"], np.full((2,), 0.1))


def _tiny_training_setup(lexicon, n_pairs=12, seed=11):
    from asrnoise import synthetic

    pairs = synthetic.make_parallel_corpus(n_pairs, seed=seed, min_words=3, max_words=5)
    vocab = C.induce_vocab([p.gt for p in pairs] + [p.asr for p in pairs], 140)
    alignments = [C.align_pair(p.gt, p.asr, lexicon) for p in pairs]
    items = C.build_training_items(alignments, vocab, [p.id for p in pairs], max_target_len=5)
    return vocab, items


class TestTrain:
    def test_loss_decreases_on_tiny_corpus(self, lexicon):
        vocab, items = _tiny_training_setup(lexicon)
        model = M.Model.build(vocab, lexicon, M.ModelConfig(d_model=16, n_heads=2), seed=1)
        log = T.train(items, model, lexicon, T.TrainConfig(learning_rate=2e-3, epochs=8, seed=4))
        assert log[-1].loss_total < log[0].loss_total

    def test_identical_seeds_give_bit_identical_checkpoints(self, lexicon, tmp_path):
        vocab, items = _tiny_training_setup(lexicon)
        paths = []
        for run in range(2):
            model = M.Model.build(vocab, lexicon, M.ModelConfig(d_model=16, n_heads=2), seed=1)
            T.train(items, model, lexicon, T.TrainConfig(learning_rate=1e-3, epochs=3, seed=9))
            path = tmp_path / f"run{run}.ckpt"
            T.save_checkpoint(path, model)
            paths.append(path.read_bytes())
        assert paths[0] == paths[1]

    def test_zero_phoneme_weight_equals_word_only_training(self, lexicon):
        vocab, items = _tiny_training_setup(lexicon)
        word_only = M.Model.build(
            vocab, lexicon, M.ModelConfig(d_model=16, n_heads=2, lambda_ph=0.0), seed=2
        )
        log_word_only = T.train(
            items, word_only, lexicon, T.TrainConfig(learning_rate=1e-3, epochs=3, seed=5)
        )
        overridden = M.Model.build(
            vocab, lexicon, M.ModelConfig(d_model=16, n_heads=2, lambda_ph=0.7), seed=2
        )
        log_override = T.train(
            items, overridden, lexicon,
            T.TrainConfig(learning_rate=1e-3, epochs=3, seed=5, lambda_ph=0.0),
        )
        assert log_word_only == log_override
        assert all(row.loss_phoneme == 0.0 for row in log_override)
        for name, array in word_only.params.items():
            np.testing.assert_array_equal(array, overridden.params[name])

    def test_memorizes_single_example(self, lexicon):
        vocab, items = _tiny_training_setup(lexicon)
        item = items[0]
        model = M.Model.build(vocab, lexicon, M.ModelConfig(d_model=16, n_heads=2), seed=3)
        T.train([item], model, lexicon, T.TrainConfig(learning_rate=5e-3, epochs=60, batch_size=1, seed=0))
        report = T.evaluate_dev([item], model, lexicon)
        assert report.token_accuracy == 1.0

    def test_horizon_violation_rejected(self, lexicon):
        vocab, items = _tiny_training_setup(lexicon)
        model = M.Model.build(vocab, lexicon, M.ModelConfig(d_model=16, n_heads=2, max_gen_len=2), seed=1)
        if all(len(i.target_ids) <= 2 for i in items):
            pytest.skip("corpus produced no long targets")
        with pytest.raises(ValueError):
            T.train(items, model, lexicon, T.TrainConfig(epochs=1))

    def test_empty_items_rejected(self, lexicon, small_model):
        with pytest.raises(ValueError):
            T.train([], small_model, lexicon, T.TrainConfig(epochs=1))


class TestEvaluateDev:
    def test_empty_dev_set_reports_zeros(self, lexicon, small_model):
        report = T.evaluate_dev([], small_model, lexicon)
        assert report == T.DevReport(0.0, 0.0, 0.0, 0, 0)

    def test_same_checkpoint_same_report(self, lexicon, small_setup, small_model):
        _, _, items = small_setup
        a = T.evaluate_dev(items[:10], small_model, lexicon)
        b = T.evaluate_dev(items[:10], small_model, lexicon)
        assert a == b

    def test_does_not_mutate_parameters(self, lexicon, small_setup, small_model):
        _, _, items = small_setup
        before = {k: v.copy() for k, v in small_model.params.items()}
        T.evaluate_dev(items[:10], small_model, lexicon)
        for name, value in small_model.params.items():
            np.testing.assert_array_equal(value, before[name])


class TestCheckpointIO:
    def test_round_trip_bit_identical(self, lexicon, small_model, tmp_path):
        path = tmp_path / "model.ckpt"
        T.save_checkpoint(path, small_model, meta={"note": "round trip"})
        loaded = T.load_checkpoint(path)
        assert loaded.config == small_model.config
        assert loaded.vocab.pieces == small_model.vocab.pieces
        assert loaded.code_index.codes == small_model.code_index.codes
        np.testing.assert_array_equal(loaded.code_index.token_rows, small_model.code_index.token_rows)
        for name, array in small_model.params.items():
            assert loaded.params[name].tobytes() == array.tobytes()
        # saving the loaded model reproduces the file byte for byte
        path2 = tmp_path / "model2.ckpt"
        T.save_checkpoint(path2, loaded, meta={"note": "round trip"})
        assert path.read_bytes() == path2.read_bytes()

    def test_truncated_file_rejected(self, lexicon, small_model, tmp_path):
        path = tmp_path / "model.ckpt"
        T.save_checkpoint(path, small_model)
        data = path.read_bytes()
        for cut in (len(data) // 3, len(data) - 5):
            bad = tmp_path / "bad.ckpt"
            bad.write_bytes(data[:cut])
            with pytest.raises(CorruptCheckpointError):
                T.load_checkpoint(bad)

    def test_trailing_garbage_rejected(self, lexicon, small_model, tmp_path):
        path = tmp_path / "model.ckpt"
        T.save_checkpoint(path, small_model)
        bad = tmp_path / "bad.ckpt"
        bad.write_bytes(path.read_bytes() + b"extra")
        with pytest.raises(CorruptCheckpointError):
            T.load_checkpoint(bad)

    def test_foreign_magic_rejected(self, tmp_path):
        path = tmp_path / "foreign.ckpt"
        path.write_bytes(b"NOPE1" + b"\x00" * 64)
        with pytest.raises(VersionMismatchError):
            T.load_checkpoint(path)


class TestLossLog:
    def test_csv_format(self, tmp_path):
        rows = [T.EpochStats(1, 2.5, 2.0, 1.0), T.EpochStats(2, 1.25, 1.0, 0.5)]
        path = tmp_path / "loss.csv"
        T.save_loss_log(path, rows, header="test")
        lines = path.read_text().splitlines()
        assert lines[0].startswith("#")
        assert lines[1] == "epoch,L_tot,L_n,L_ph"
        assert lines[2].startswith("1,2.5,")

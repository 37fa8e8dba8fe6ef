"""Tests for training-pair construction, the training loops and checkpoints."""

import dataclasses
from pathlib import Path

import numpy as np
import pytest

from src.data.phantom import phantom_generate
from src.evaluate.metrics import evaluate, neighbor_average, psnr
from src.losses import FeatureNet
from src.models.cine import CineSequence
from src.models.config import FeatureNetConfig, PhantomParams, TrainConfig, TrainMode
from src.models.report import TrainLog
from src.networks.cascade import cascade_forward
from src.networks.checkpoint import CheckpointError, IncompatibleCheckpointError
from src.networks.recurrent import GeneratorWeights, deblur_sequence, interpolate_frame
from src.tensor import Tensor, adam_step, ops
from src.train import (
    NonFiniteLossError,
    TrainResult,
    TrainingPair,
    fine_tune,
    load_checkpoint,
    make_training_pairs,
    moving_average,
    save_checkpoint,
    train_cascade,
    train_interpolation,
    train_recurrent_gan,
)
from src.train.log import epoch_means
from src.train.loop import epoch_batches
from src.train.pairs import INTERP_CENTER, interpolation_inputs, stack


def _make_phantoms(count: int = 1, frames: int = 6) -> list[CineSequence]:
    return [
        phantom_generate(
            PhantomParams(
                height=16, width=16, frames=frames, outer_a=5.0, outer_b=4.5, wall=1.5,
                period=frames, phase_offset=float(i),
            )
        )
        for i in range(count)
    ]


def _make_config(tmp_path: Path, **overrides: object) -> TrainConfig:
    base = TrainConfig(
        mode=TrainMode.RECURRENT_GAN,
        epochs=1,
        batch_size=1,
        seq_length=3,
        n_mix=1,
        frame_size=16,
        width_divisor=16,
        checkpoint_dir=str(tmp_path),
    )
    return dataclasses.replace(base, **overrides)


@pytest.fixture
def feature_net() -> FeatureNet:
    return FeatureNet(FeatureNetConfig(channels=(2,) * 10))


def _overfit_feature_net() -> FeatureNet:
    """Two wide taps close to the pixels, cheap enough for a few hundred steps."""
    return FeatureNet(FeatureNetConfig(channels=(8, 8, 8, 8), taps=(1, 2)))


def _overfit_config(tmp_path: Path, **overrides: object) -> TrainConfig:
    """One 8-frame 32x32 phantom degraded with N = 2, one window per step.

    Mean feature distances are small next to the critic's unit-norm input
    gradient, so the perceptual weight is raised for these short runs.
    """
    base = TrainConfig(
        mode=TrainMode.RECURRENT_GAN,
        batch_size=1,
        seq_length=8,
        n_mix=2,
        keep_fraction=0.25,
        frame_size=32,
        width_divisor=8,
        lr=1e-3,
        lambda_per=1e4,
        checkpoint_dir=str(tmp_path),
    )
    return dataclasses.replace(base, **overrides)


def _assert_same_params(a: dict[str, np.ndarray], b: dict[str, np.ndarray]) -> None:
    assert a.keys() == b.keys()
    for name in a:
        np.testing.assert_array_equal(a[name], b[name], err_msg=name)


class TestTrainingPairs:
    def test_non_overlapping_windows(self, tmp_path: Path) -> None:
        pairs = make_training_pairs(_make_phantoms(2, frames=7), _make_config(tmp_path))
        assert len(pairs) == 4
        assert all(p.degraded.shape == p.clean.shape == (3, 16, 16) for p in pairs)

    def test_clean_frames_are_normalized_crops(self, tmp_path: Path) -> None:
        seq = _make_phantoms()[0]
        pairs = make_training_pairs([seq], _make_config(tmp_path))
        assert pairs[0].clean.min() == 0.0 and pairs[0].clean.max() == 1.0
        assert not np.allclose(pairs[0].degraded, pairs[0].clean)

    def test_cascade_uses_triples(self, tmp_path: Path) -> None:
        config = _make_config(tmp_path, mode=TrainMode.CASCADE, seq_length=5)
        pairs = make_training_pairs(_make_phantoms(frames=6), config)
        assert [p.clean.shape[0] for p in pairs] == [3, 3]

    def test_short_sequence_rejected(self, tmp_path: Path) -> None:
        with pytest.raises(ValueError, match="shorter than the window"):
            make_training_pairs(_make_phantoms(frames=2), _make_config(tmp_path))

    def test_stack_and_interpolation_inputs(self) -> None:
        windows = np.arange(2 * 7 * 4, dtype=np.float32).reshape(2, 7, 2, 2)
        inputs = interpolation_inputs(windows)
        assert inputs.shape == (2, 6, 2, 2)
        np.testing.assert_array_equal(inputs[:, 3], windows[:, 4])
        with pytest.raises(ValueError, match="7 frames"):
            interpolation_inputs(windows[:, :5])

    def test_stack_orders_by_index(self, tmp_path: Path) -> None:
        pairs = make_training_pairs(_make_phantoms(frames=6), _make_config(tmp_path))
        degraded, clean = stack(pairs, np.array([1, 0]))
        np.testing.assert_array_equal(clean[0], pairs[1].clean)
        assert degraded.shape == (2, 3, 16, 16)

    def test_epoch_batches_cover_everything(self) -> None:
        batches = epoch_batches(5, 2, np.random.default_rng(0))
        assert [len(b) for b in batches] == [2, 2, 1]
        assert sorted(np.concatenate(batches).tolist()) == [0, 1, 2, 3, 4]


class TestRecurrentTraining:
    """WGAN-GP loop for the deblurring and interpolation generators."""

    def test_zero_epochs_keeps_initial_weights(
        self, tmp_path: Path, feature_net: FeatureNet
    ) -> None:
        config = _make_config(tmp_path, epochs=0)
        result = train_recurrent_gan(config, _make_phantoms(), feature_net)
        initial = GeneratorWeights.initialize(config.recurrent_architecture(), config.seed)
        assert result.generator is not None
        _assert_same_params(result.generator.params.arrays(), initial.params.arrays())
        assert result.iterations == 0
        assert len(result.log) == 0

    def test_logs_every_iteration(self, tmp_path: Path, feature_net: FeatureNet) -> None:
        result = train_recurrent_gan(_make_config(tmp_path), _make_phantoms(), feature_net)
        assert result.iterations == 2
        frame = result.log.to_frame()
        assert list(frame.columns) == [
            "epoch", "step", "wasserstein", "perceptual", "g_loss", "d_loss"
        ]
        assert frame["step"].tolist() == [1, 2]

    def test_weights_move(self, tmp_path: Path, feature_net: FeatureNet) -> None:
        config = _make_config(tmp_path)
        result = train_recurrent_gan(config, _make_phantoms(), feature_net)
        initial = GeneratorWeights.initialize(config.recurrent_architecture(), config.seed)
        assert result.generator is not None
        moved = result.generator.params["dec7.w"].data
        assert not np.array_equal(moved, initial.params["dec7.w"].data)

    def test_deterministic(self, tmp_path: Path, feature_net: FeatureNet) -> None:
        config = _make_config(tmp_path, n_critic=2)
        first = train_recurrent_gan(config, _make_phantoms(), feature_net)
        second = train_recurrent_gan(config, _make_phantoms(), feature_net)
        assert first.generator is not None and second.generator is not None
        _assert_same_params(first.generator.params.arrays(), second.generator.params.arrays())
        assert first.log.records == second.log.records

    def test_iteration_cap(self, tmp_path: Path, feature_net: FeatureNet) -> None:
        config = _make_config(tmp_path, epochs=3, max_iterations=1)
        result = train_recurrent_gan(config, _make_phantoms(), feature_net)
        assert result.iterations == 1
        assert len(result.log) == 1

    def test_periodic_checkpoints(self, tmp_path: Path, feature_net: FeatureNet) -> None:
        config = _make_config(tmp_path, epochs=2, checkpoint_interval=1, max_iterations=2)
        train_recurrent_gan(config, _make_phantoms(), feature_net)
        assert (tmp_path / "recurrent_gan_epoch001.ckpt").exists()

    def test_non_finite_loss_aborts_with_checkpoint(
        self, tmp_path: Path, feature_net: FeatureNet, monkeypatch: pytest.MonkeyPatch
    ) -> None:
        monkeypatch.setattr(
            "src.train.recurrent_gan.discriminator_loss",
            lambda *args: Tensor(np.array(np.nan)),
        )
        with pytest.raises(NonFiniteLossError) as exc_info:
            train_recurrent_gan(_make_config(tmp_path), _make_phantoms(), feature_net)
        expected = tmp_path / "recurrent_gan_nonfinite_e001_i000000.ckpt"
        assert exc_info.value.checkpoint == expected
        assert load_checkpoint(expected).family == "recurrent"

    def test_non_finite_op_aborts_with_checkpoint(
        self, tmp_path: Path, feature_net: FeatureNet, monkeypatch: pytest.MonkeyPatch
    ) -> None:
        monkeypatch.setattr(
            "src.train.recurrent_gan.feature_loss",
            lambda a, b, net: ops.sum(a) * Tensor(np.array(np.inf)),
        )
        with pytest.raises(NonFiniteLossError, match="generator loss") as exc_info:
            train_recurrent_gan(_make_config(tmp_path), _make_phantoms(), feature_net)
        assert exc_info.value.checkpoint.exists()

    def test_wrong_mode_rejected(self, tmp_path: Path, feature_net: FeatureNet) -> None:
        config = _make_config(tmp_path, mode=TrainMode.CASCADE)
        with pytest.raises(ValueError, match="expected recurrent_gan"):
            train_recurrent_gan(config, _make_phantoms(), feature_net)

    def test_interpolation(self, tmp_path: Path, feature_net: FeatureNet) -> None:
        config = _make_config(tmp_path, mode=TrainMode.INTERPOLATION, seq_length=7)
        result = train_interpolation(config, _make_phantoms(frames=7), feature_net)
        assert result.generator is not None
        assert result.generator.arch.in_frames == 2
        assert result.iterations == 1


class TestCascadeTraining:
    """Two-phase transformer/synthesis training."""

    def _config(self, tmp_path: Path, **overrides: object) -> TrainConfig:
        return _make_config(tmp_path, mode=TrainMode.CASCADE, batch_size=2, **overrides)

    def test_loss_weights_swap_after_transformer_phase(
        self, tmp_path: Path, feature_net: FeatureNet
    ) -> None:
        config = self._config(tmp_path, epochs=2, transformer_phase_epochs=1)
        result = train_cascade(config, _make_phantoms(), feature_net)
        frame = result.log.to_frame()
        assert frame["alpha"].tolist() == [1.0, 0.01]
        assert frame["beta"].tolist() == [0.01, 1.0]

    def test_total_is_weighted_sum(self, tmp_path: Path, feature_net: FeatureNet) -> None:
        result = train_cascade(self._config(tmp_path), _make_phantoms(), feature_net)
        row = result.log.records[0]
        expected = row["alpha"] * row["transformer"] + row["beta"] * row["synthesis"]
        assert row["total"] == pytest.approx(expected, rel=1e-4)
        assert row["transformer"] == pytest.approx(row["inpaint"] + row["multistep"], rel=1e-4)

    def test_checkpoint_roundtrip(self, tmp_path: Path, feature_net: FeatureNet) -> None:
        result = train_cascade(self._config(tmp_path), _make_phantoms(), feature_net)
        path = save_checkpoint(tmp_path / "cascade.ckpt", result)
        loaded = load_checkpoint(path)
        assert loaded.family == "cascade" and loaded.cascade is not None
        assert result.cascade is not None
        assert loaded.cascade.arch == result.cascade.arch
        _assert_same_params(loaded.cascade.params.arrays(), result.cascade.params.arrays())
        adam = loaded.checkpoint.adam_state("cascade")
        assert adam is not None and adam.t == 1

    def test_wrong_mode_rejected(self, tmp_path: Path, feature_net: FeatureNet) -> None:
        with pytest.raises(ValueError, match="expected cascade"):
            train_cascade(_make_config(tmp_path), _make_phantoms(), feature_net)

    @pytest.mark.slow
    def test_overfits_single_triple(self, tmp_path: Path) -> None:
        """Two compressed 150-step phases on one triple."""
        config = _make_config(
            tmp_path, mode=TrainMode.CASCADE, frame_size=32, width_divisor=8, lr=1e-3,
            epochs=300, transformer_phase_epochs=150,
        )
        phantom = phantom_generate(PhantomParams(frames=3))
        result = train_cascade(config, [phantom], _overfit_feature_net())
        assert result.iterations == 300
        totals = result.log.column("total")
        assert np.mean(totals[-10:]) <= 0.5 * np.mean(totals[:10])

        pair = make_training_pairs([phantom], config)[0]
        assert result.cascade is not None
        out = cascade_forward(Tensor(pair.degraded[None]), result.cascade)
        top, left = out.origin
        size = result.cascade.arch.patch_size
        box = (slice(top, top + size), slice(left, left + size))
        truth = pair.clean[1][box]
        outside = np.ones(pair.degraded[1].shape, dtype=bool)
        outside[box] = False
        mean_fill = np.full_like(truth, pair.degraded[1][outside].mean())
        predicted = out.patches[1].data[0, 0]
        assert np.mean((predicted - truth) ** 2) <= 0.5 * np.mean((mean_fill - truth) ** 2)


@pytest.fixture(scope="class")
def deblur_overfit(tmp_path_factory: pytest.TempPathFactory) -> tuple[TrainResult, TrainingPair]:
    config = _overfit_config(tmp_path_factory.mktemp("deblur"), epochs=300)
    phantom = phantom_generate(PhantomParams())
    result = train_recurrent_gan(config, [phantom], _overfit_feature_net())
    return result, make_training_pairs([phantom], config)[0]


@pytest.mark.slow
class TestRecurrentOverfit:
    """Short overfit runs on a single 8-frame phantom."""

    def test_deblurring_beats_degraded_input(
        self, deblur_overfit: tuple[TrainResult, TrainingPair]
    ) -> None:
        result, pair = deblur_overfit
        assert result.generator is not None and result.iterations == 300
        clean = CineSequence(pair.clean)
        deblurred = deblur_sequence(CineSequence(pair.degraded), result.generator)
        before = evaluate(clean, CineSequence(pair.degraded)).psnr_mean
        after = evaluate(clean, deblurred).psnr_mean
        assert after >= before + 2.0

    def test_perceptual_moving_average_falls(
        self, deblur_overfit: tuple[TrainResult, TrainingPair]
    ) -> None:
        result, _ = deblur_overfit
        averaged = moving_average(result.log.column("perceptual")[:200], 50)
        assert averaged[-1] < averaged[49]

    def test_interpolation_beats_neighbor_average(self, tmp_path: Path) -> None:
        config = _overfit_config(
            tmp_path, mode=TrainMode.INTERPOLATION, seq_length=7, epochs=300
        )
        phantom = phantom_generate(PhantomParams())
        result = train_interpolation(config, [phantom], _overfit_feature_net())
        assert result.generator is not None and result.iterations == 300

        pair = make_training_pairs([phantom], config)[0]
        inputs = interpolation_inputs(pair.degraded[None])
        predicted = interpolate_frame(Tensor(inputs), result.generator).data[0, 0]
        truth = pair.clean[INTERP_CENTER]
        baseline = neighbor_average(
            pair.degraded[INTERP_CENTER - 1], pair.degraded[INTERP_CENTER + 1]
        )
        assert psnr(truth, np.clip(predicted, 0.0, 1.0)) >= psnr(truth, baseline) + 1.0


class TestCheckpoints:
    def test_recurrent_roundtrip(self, tmp_path: Path, feature_net: FeatureNet) -> None:
        result = train_recurrent_gan(_make_config(tmp_path), _make_phantoms(), feature_net)
        path = save_checkpoint(tmp_path / "gan.ckpt", result)
        loaded = load_checkpoint(path, result.config.config_hash())
        assert loaded.generator is not None and loaded.discriminator is not None
        assert result.generator is not None and result.discriminator is not None
        _assert_same_params(loaded.generator.params.arrays(), result.generator.params.arrays())
        _assert_same_params(
            loaded.discriminator.params.arrays(), result.discriminator.params.arrays()
        )
        assert loaded.checkpoint.metadata["config_hash"] == result.config.config_hash()
        adam = loaded.checkpoint.adam_state("generator")
        assert adam is not None and adam.t == 2
        assert adam.m.keys() == set(result.generator.params)

    def test_adam_state_roundtrip_is_exact(
        self, tmp_path: Path, feature_net: FeatureNet
    ) -> None:
        result = train_recurrent_gan(_make_config(tmp_path), _make_phantoms(), feature_net)
        result.adam["generator"].beta1 = 0.8
        result.adam["discriminator"].epsilon = 1e-6
        loaded = load_checkpoint(save_checkpoint(tmp_path / "gan.ckpt", result))
        assert loaded.adam.keys() == {"generator", "discriminator"}
        for network, saved in result.adam.items():
            restored = loaded.adam[network]
            assert (restored.lr, restored.beta1, restored.beta2, restored.epsilon, restored.t) == (
                saved.lr, saved.beta1, saved.beta2, saved.epsilon, saved.t
            )
            for buffers, expected in ((restored.m, saved.m), (restored.v, saved.v)):
                assert buffers.keys() == expected.keys()
                for name, value in expected.items():
                    assert buffers[name].dtype == np.float64
                    assert buffers[name].tobytes() == value.tobytes(), name

    def test_resumed_adam_step_matches_uninterrupted(
        self, tmp_path: Path, feature_net: FeatureNet
    ) -> None:
        result = train_recurrent_gan(_make_config(tmp_path), _make_phantoms(), feature_net)
        loaded = load_checkpoint(save_checkpoint(tmp_path / "gan.ckpt", result))
        assert result.generator is not None and loaded.generator is not None
        rng = np.random.default_rng(0)
        grads = {name: rng.normal(size=t.shape) for name, t in result.generator.params.items()}
        adam_step(result.generator.params.tensors, grads, result.adam["generator"])
        adam_step(loaded.generator.params.tensors, grads, loaded.adam["generator"])
        _assert_same_params(loaded.generator.params.arrays(), result.generator.params.arrays())

    def test_adam_metadata_required(self, tmp_path: Path, feature_net: FeatureNet) -> None:
        config = _make_config(tmp_path, epochs=0)
        result = train_recurrent_gan(config, _make_phantoms(), feature_net)
        ckpt = result.to_checkpoint()
        del ckpt.metadata["adam.generator.beta2"]
        with pytest.raises(CheckpointError, match="adam.generator.beta2"):
            ckpt.adam_state("generator")

    def test_bad_magic_rejected(self, tmp_path: Path) -> None:
        path = tmp_path / "bad.ckpt"
        path.write_bytes(b"NOPE" + bytes(10))
        with pytest.raises(CheckpointError, match="bad magic"):
            load_checkpoint(path)

    def test_truncated_rejected(self, tmp_path: Path, feature_net: FeatureNet) -> None:
        result = train_recurrent_gan(
            _make_config(tmp_path, epochs=0), _make_phantoms(), feature_net
        )
        path = save_checkpoint(tmp_path / "cut.ckpt", result)
        path.write_bytes(path.read_bytes()[:-3])
        with pytest.raises(CheckpointError, match="truncated"):
            load_checkpoint(path)


class TestFineTune:
    def _trained(self, tmp_path: Path, feature_net: FeatureNet) -> Path:
        result = train_recurrent_gan(_make_config(tmp_path), _make_phantoms(), feature_net)
        return save_checkpoint(tmp_path / "base.ckpt", result)

    def test_zero_epochs_returns_loaded_weights(
        self, tmp_path: Path, feature_net: FeatureNet
    ) -> None:
        path = self._trained(tmp_path, feature_net)
        config = _make_config(tmp_path, fine_tune_epochs=0)
        result = fine_tune(config, path, _make_phantoms(), feature_net)
        loaded = load_checkpoint(path)
        assert result.generator is not None and loaded.generator is not None
        _assert_same_params(result.generator.params.arrays(), loaded.generator.params.arrays())

    def test_uses_fine_tune_rate(self, tmp_path: Path, feature_net: FeatureNet) -> None:
        path = self._trained(tmp_path, feature_net)
        config = _make_config(tmp_path, fine_tune_epochs=1, fine_tune_lr=3e-5)
        result = fine_tune(config, path, _make_phantoms(), feature_net)
        assert result.adam["generator"].lr == 3e-5
        assert result.adam["generator"].t == 2

    def test_incompatible_architecture_rejected(
        self, tmp_path: Path, feature_net: FeatureNet
    ) -> None:
        path = self._trained(tmp_path, feature_net)
        config = _make_config(tmp_path, width_divisor=8)
        with pytest.raises(IncompatibleCheckpointError) as exc_info:
            fine_tune(config, path, _make_phantoms(), feature_net)
        assert exc_info.value.offenders
        assert all("generator." in name for name in exc_info.value.offenders)

    @pytest.mark.slow
    def test_loss_decreases_on_new_phantom(self, tmp_path: Path) -> None:
        config = _make_config(
            tmp_path, epochs=5, lr=1e-3, lambda_per=1e4, fine_tune_epochs=40, fine_tune_lr=1e-3
        )
        feature_net = _overfit_feature_net()
        base = train_recurrent_gan(config, _make_phantoms(), feature_net)
        path = save_checkpoint(tmp_path / "base.ckpt", base)
        variant = phantom_generate(
            PhantomParams(
                height=16, width=16, frames=6, outer_a=5.5, outer_b=4.0, wall=1.5,
                period=6, phase_offset=2.0,
            )
        )
        result = fine_tune(config, path, [variant], feature_net)
        perceptual = result.log.column("perceptual")
        assert len(perceptual) == 80
        assert np.mean(perceptual[-10:]) < np.mean(perceptual[:10])


class TestTrainLog:
    def test_moving_average(self) -> None:
        assert moving_average([1.0, 2.0, 3.0, 4.0], 2) == [1.0, 1.5, 2.5, 3.5]

    def test_moving_average_window_rejected(self) -> None:
        with pytest.raises(ValueError, match="window"):
            moving_average([1.0], 0)

    def test_out_of_order_rejected(self) -> None:
        log = TrainLog(["loss"])
        log.append(1, 1, loss=0.5)
        log.append(2, 2, loss=0.4)
        with pytest.raises(ValueError, match="does not follow"):
            log.append(2, 2, loss=0.3)

    def test_missing_and_non_finite_values_rejected(self) -> None:
        log = TrainLog(["a", "b"])
        with pytest.raises(ValueError, match="missing columns"):
            log.append(1, 1, a=1.0)
        with pytest.raises(ValueError, match="non-finite"):
            log.append(1, 1, a=1.0, b=float("inf"))

    def test_epoch_means(self) -> None:
        log = TrainLog(["loss"])
        for step, (epoch, loss) in enumerate([(1, 1.0), (1, 3.0), (2, 5.0)], start=1):
            log.append(epoch, step, loss=loss)
        assert epoch_means(log)["loss"].tolist() == [2.0, 5.0]

    def test_csv(self, tmp_path: Path) -> None:
        log = TrainLog(["loss"])
        log.append(1, 1, loss=0.25)
        path = tmp_path / "log.csv"
        log.write_csv(path)
        assert path.read_text().splitlines() == ["epoch,step,loss", "1,1,0.25"]

import numpy as np
import pytest

from conftest import make_dataset
from protokws.config import load_config, validate_config
from protokws.datamodel import FeatureDataset, Stage
from protokws.encoder import EncoderCheckpoint, checkpoint_bytes, init_encoder
from protokws.errors import (
    DimMismatch,
    EmptyDataset,
    InvalidConfig,
    NonFiniteLoss,
    SpeakerLeakage,
)
from protokws.losses import LossSetting
from protokws.trainer import (
    Adam,
    OptimizerKind,
    Sgd,
    StagePlan,
    TrainConfig,
    lr_at_step,
    read_history,
    run_three_stage,
    train_stage,
    write_history,
)


def _init(d_in=4, seed=0):
    return EncoderCheckpoint(params=init_encoder(d_in, 8, 4, seed), stage=Stage.PRETRAIN)


def _separable(n_per_class=10, speaker="S1", d_in=4, seed=0):
    rng = np.random.default_rng(seed)
    firsts, labels = [], []
    for label, sign in ((0, 1.0), (1, -1.0)):
        for _ in range(n_per_class):
            point = rng.standard_normal(d_in) * 0.3
            point[0] += 2.0 * sign
            firsts.append(point)
            labels.append(label)
    return make_dataset(firsts, labels, speaker=speaker, n_frames=2)


def test_lr_schedule():
    config = TrainConfig(peak_lr=1e-3, warmup_steps=200)
    assert lr_at_step(config, 0) == 0.0
    assert lr_at_step(config, 100) == pytest.approx(5e-4)
    assert lr_at_step(config, 200) == pytest.approx(1e-3)
    assert lr_at_step(config, 10_000) == pytest.approx(1e-3)
    assert lr_at_step(TrainConfig(peak_lr=0.5, warmup_steps=0), 0) == 0.5
    with pytest.raises(InvalidConfig):
        lr_at_step(config, -1)


def test_train_config_rejects_unknown_keys(tmp_path):
    path = tmp_path / "train.json"
    path.write_text('{"peak_lr": 0.01, "momentum": 0.9}')
    with pytest.raises(InvalidConfig):
        load_config(TrainConfig, path)
    with pytest.raises(InvalidConfig):
        validate_config(TrainConfig, {"batch_size": 1})
    with pytest.raises(InvalidConfig):
        TrainConfig(batch_size=1)
    with pytest.raises(InvalidConfig):
        TrainConfig().updated(peak_lr=-1.0)


def test_train_config_reads_loss_setting(tmp_path):
    path = tmp_path / "train.json"
    path.write_text('{"loss_setting": {"base": "ctc", "add_scl": true}, "optimizer": "sgd"}')
    config = load_config(TrainConfig, path)
    assert config.loss_setting == LossSetting.parse("ctc+scl")
    assert config.optimizer is OptimizerKind.SGD


def test_sgd_step():
    params = init_encoder(2, 2, 2, seed=0)
    grads = params.zeros_like()
    grads.W1[:] = 0.5

    updated = Sgd().update(params, grads, 0.1)

    expected = (params.W1.astype(np.float64) - 0.05).astype(np.float32)
    assert updated.W1.tobytes() == expected.tobytes()
    assert updated.b1.tobytes() == params.b1.tobytes()
    assert updated.W1.dtype == np.float32


def test_adam_first_step_moves_by_lr():
    params = init_encoder(2, 2, 2, seed=0)
    grads = params.zeros_like()
    grads.W2[:] = 3.0

    updated = Adam().update(params, grads, 0.01)

    assert np.allclose(updated.W2, params.W2 - 0.01, atol=1e-6)


def test_zero_learning_rate_stops_after_patience():
    init = _init()
    data = _separable(n_per_class=1)
    config = TrainConfig(
        peak_lr=0.0, warmup_steps=0, batch_size=2, patience_epochs=10, max_epochs=50
    )

    ckpt, history = train_stage(init, data, config, Stage.SIC)

    assert len(history) == 11
    assert ckpt.params.bitwise_equal(init.params)
    assert len({r.mean_loss for r in history}) == 1


@pytest.mark.parametrize("optimizer, peak_lr", [("adam", 0.05), ("adam", 1.0), ("sgd", 0.05)])
def test_early_stop_bound_and_best_epoch(optimizer, peak_lr):
    config = TrainConfig(
        peak_lr=peak_lr,
        warmup_steps=0,
        batch_size=4,
        patience_epochs=2,
        max_epochs=40,
        optimizer=optimizer,
    )

    ckpt, history = train_stage(_init(), _separable(), config, Stage.SIC)

    losses = [r.mean_loss for r in history]
    best_epoch = losses.index(min(losses)) + 1
    assert len(history) <= best_epoch + config.patience_epochs
    if len(history) < config.max_epochs:
        assert len(history) == best_epoch + config.patience_epochs

    truncated, _ = train_stage(_init(), _separable(), config.updated(max_epochs=best_epoch))
    assert ckpt.params.bitwise_equal(truncated.params)


def test_training_reduces_loss_on_separable_data():
    config = TrainConfig(peak_lr=0.05, warmup_steps=0, batch_size=4, max_epochs=15)

    _, history = train_stage(_init(), _separable(), config, Stage.SIC)

    assert history[-1].mean_loss < history[0].mean_loss
    assert [r.epoch for r in history] == list(range(1, len(history) + 1))


@pytest.mark.parametrize("loss", ["ce", "ctc", "ce+scl", "ctc+scl"])
def test_training_is_deterministic(loss):
    config = TrainConfig(
        peak_lr=0.01,
        warmup_steps=3,
        batch_size=4,
        max_epochs=3,
        seed=5,
        loss_setting=LossSetting.parse(loss),
    )

    first, first_history = train_stage(_init(), _separable(), config, Stage.SIC)
    second, second_history = train_stage(_init(), _separable(), config, Stage.SIC)

    assert checkpoint_bytes(first) == checkpoint_bytes(second)
    assert first_history == second_history
    assert all(np.isfinite(r.mean_loss) for r in first_history)


def test_checkpoint_provenance():
    config = TrainConfig(peak_lr=0.01, max_epochs=2, seed=99)

    ckpt, _ = train_stage(_init(), _separable(), config, Stage.SID)

    assert ckpt.stage is Stage.SID
    assert ckpt.seed == 99
    assert ckpt.generation == 1
    assert ckpt.config_digest != bytes(32)


def test_train_rejects_empty_and_mismatched_data():
    with pytest.raises(EmptyDataset):
        train_stage(_init(), FeatureDataset(records=[], features=[]), TrainConfig())
    with pytest.raises(DimMismatch):
        train_stage(_init(d_in=3), _separable(d_in=4), TrainConfig())


def test_divergence_raises_non_finite_loss():
    config = TrainConfig(peak_lr=1e300, warmup_steps=0, optimizer=OptimizerKind.SGD)
    with pytest.raises(NonFiniteLoss):
        train_stage(_init(), _separable(), config)


def test_history_csv_round_trip(tmp_path):
    config = TrainConfig(peak_lr=0.01, warmup_steps=2, batch_size=4, max_epochs=3)
    _, history = train_stage(_init(), _separable(), config)
    path = tmp_path / "loss.csv"

    write_history(history, path)

    assert path.read_text().splitlines()[0] == "epoch,mean_loss,lr_last_step"
    assert read_history(path) == history


def _plan(stage2_speaker="U01", stage3_lr=0.0):
    quick = TrainConfig(peak_lr=0.01, warmup_steps=0, batch_size=4, max_epochs=2)
    return StagePlan(
        stage1_data=_separable(speaker="C01", seed=1),
        stage2_data=_separable(speaker=stage2_speaker, seed=2),
        stage3_data=_separable(n_per_class=3, speaker="T01", seed=3),
        stage1=quick,
        stage2=quick,
        stage3=quick.updated(peak_lr=stage3_lr),
    )


def test_three_stages_chain_checkpoints():
    result = run_three_stage(_plan(), _init())

    assert [c.stage for c in (result.sic, result.sid, result.sdd)] == [
        Stage.SIC,
        Stage.SID,
        Stage.SDD,
    ]
    assert [c.generation for c in (result.sic, result.sid, result.sdd)] == [1, 2, 3]
    assert result.sdd.params.bitwise_equal(result.sid.params)
    assert not result.sid.params.bitwise_equal(result.sic.params)
    assert len(result.histories) == 3


def test_target_speaker_must_not_leak_into_stage_two():
    with pytest.raises(SpeakerLeakage):
        run_three_stage(_plan(stage2_speaker="T01"), _init())

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from pydantic import Field

from protokws.config import ConfigModel, config_digest
from protokws.datamodel.features import FeatureDataset, load_dataset
from protokws.datamodel.manifest import Manifest
from protokws.datamodel.models import Stage
from protokws.encoder.checkpoint import EncoderCheckpoint
from protokws.encoder.network import EncoderParams, backward_batch, forward_batch
from protokws.errors import DimMismatch, EmptyDataset, IoFailure, NonFiniteLogits, NonFiniteLoss
from protokws.losses.combined import LossSetting, combined_loss
from protokws.losses.scl import SclConfig
from protokws.trainer.schedule import OptimizerKind, make_optimizer, warmup_lr

TrainingData = Union[Manifest, FeatureDataset]


class TrainConfig(ConfigModel):
    """Settings for one training stage. Accepted as JSON with exactly these keys."""

    peak_lr: float = Field(default=1e-3, ge=0.0)
    warmup_steps: int = Field(default=200, ge=0)
    batch_size: int = Field(default=16, ge=2)
    patience_epochs: int = Field(default=10, ge=1)
    max_epochs: int = Field(default=50, ge=1)
    seed: int = Field(default=0, ge=0)
    optimizer: OptimizerKind = OptimizerKind.ADAM
    loss_setting: LossSetting = LossSetting()
    scl: SclConfig = SclConfig()


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    mean_loss: float
    lr_last_step: float


def lr_at_step(config: TrainConfig, step: int) -> float:
    """
    Learning rate for a given optimizer step.

    Ramps linearly from 0 at step 0 to peak_lr at warmup_steps and stays there.
    """
    return warmup_lr(config.peak_lr, config.warmup_steps, step)


def _as_dataset(data: TrainingData) -> FeatureDataset:
    if isinstance(data, FeatureDataset):
        return data
    return load_dataset(data)


def _all_finite(params: EncoderParams) -> bool:
    return all(np.all(np.isfinite(value)) for _, value in params.items())


def train_stage(
    init: EncoderCheckpoint,
    data: TrainingData,
    config: TrainConfig,
    stage: Optional[Stage] = None,
) -> Tuple[EncoderCheckpoint, List[EpochRecord]]:
    """
    Fine-tune an encoder on one dataset.

    Each epoch visits a seeded shuffle of the data in mini-batches. Training
    stops at max_epochs, or once the epoch-mean loss has failed to strictly
    improve on the best so far for patience_epochs epochs in a row.

    Args:
        init: Starting checkpoint; its parameters are not modified.
        data: Manifest or already loaded dataset.
        config: Stage settings.
        stage: Tag for the produced checkpoint; defaults to init's tag.

    Returns:
        The checkpoint from the best epoch and the per-epoch loss history.

    Raises:
        EmptyDataset: If data has no utterances.
        DimMismatch: If the feature dimension differs from the encoder input.
        NonFiniteLoss: If the loss or the updated parameters leave the finite range.
    """
    dataset = _as_dataset(data)
    if len(dataset) == 0:
        raise EmptyDataset("Cannot train on an empty dataset")
    d_in = init.dims[0]
    if dataset.feature_dim != d_in:
        raise DimMismatch(
            f"Training features have D={dataset.feature_dim}, encoder expects {d_in}"
        )
    tag = stage or init.stage

    rng = np.random.default_rng(config.seed)
    optimizer = make_optimizer(config.optimizer)
    setting = config.loss_setting
    params = init.params.copy()
    best_params = params.copy()
    best_loss = math.inf
    stale_epochs = 0
    step = 0
    history: List[EpochRecord] = []

    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(dataset))
        batch_losses = []
        lr = 0.0
        for start in range(0, len(order), config.batch_size):
            indices = order[start : start + config.batch_size]
            feats = [dataset.features[i] for i in indices]
            labels = [dataset.records[i].label for i in indices]
            try:
                outputs = forward_batch(params, feats)
                result = combined_loss(setting, outputs, labels, config.scl)
            except NonFiniteLogits as e:
                raise NonFiniteLoss(
                    f"{tag.value} training diverged at epoch {epoch}, step {step + 1}",
                    e.developer_message,
                ) from e
            if not math.isfinite(result.total):
                raise NonFiniteLoss(
                    f"{tag.value} training diverged at epoch {epoch}, step {step + 1}",
                    f"base={result.base!r} scl={result.scl!r} "
                    f"utts={[dataset.utt_ids[i] for i in indices]}",
                )
            grads = backward_batch(params, feats, result.grads)
            step += 1
            lr = lr_at_step(config, step)
            params = optimizer.update(params, grads, lr)
            if not _all_finite(params):
                raise NonFiniteLoss(
                    f"{tag.value} parameters left the finite range at epoch {epoch}, step {step}",
                    f"lr={lr!r} last batch loss={result.total!r}",
                )
            batch_losses.append(result.total)

        mean_loss = float(np.mean(batch_losses))
        history.append(EpochRecord(epoch=epoch, mean_loss=mean_loss, lr_last_step=lr))
        logger.debug(f"{tag.value} epoch {epoch}: mean loss {mean_loss:.6f}, lr {lr:.3g}")

        if mean_loss < best_loss:
            best_loss = mean_loss
            best_params = params.copy()
            stale_epochs = 0
        else:
            stale_epochs += 1
            if stale_epochs >= config.patience_epochs:
                logger.debug(f"{tag.value} early stop after epoch {epoch}")
                break

    logger.info(
        f"{tag.value} training finished after {len(history)} epochs, best mean loss {best_loss:.6f}"
    )
    checkpoint = EncoderCheckpoint(
        params=best_params,
        stage=tag,
        seed=config.seed,
        generation=init.generation + 1,
        config_digest=config_digest(config),
    )
    return checkpoint, history


def write_history(history: Sequence[EpochRecord], path: Union[str, Path]) -> None:
    """Write the loss history as CSV with columns epoch, mean_loss, lr_last_step."""
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        with open(target, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["epoch", "mean_loss", "lr_last_step"])
            for record in history:
                writer.writerow([record.epoch, repr(record.mean_loss), repr(record.lr_last_step)])
    except OSError as e:
        raise IoFailure(f"Cannot write loss history {target}", str(e)) from e


def read_history(path: Union[str, Path]) -> List[EpochRecord]:
    source = Path(path)
    try:
        with open(source, newline="", encoding="utf-8") as handle:
            rows = list(csv.DictReader(handle))
    except OSError as e:
        raise IoFailure(f"Cannot read loss history {source}", str(e)) from e
    return [
        EpochRecord(
            epoch=int(row["epoch"]),
            mean_loss=float(row["mean_loss"]),
            lr_last_step=float(row["lr_last_step"]),
        )
        for row in rows
    ]

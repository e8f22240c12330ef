from protokws.trainer.loop import (
    EpochRecord,
    TrainConfig,
    lr_at_step,
    read_history,
    train_stage,
    write_history,
)
from protokws.trainer.schedule import Adam, Optimizer, OptimizerKind, Sgd, make_optimizer
from protokws.trainer.stages import StagePlan, StageResult, run_three_stage

__all__ = [
    "EpochRecord",
    "TrainConfig",
    "lr_at_step",
    "read_history",
    "train_stage",
    "write_history",
    "Adam",
    "Optimizer",
    "OptimizerKind",
    "Sgd",
    "make_optimizer",
    "StagePlan",
    "StageResult",
    "run_three_stage",
]

from protokws.classify import (
    PrototypeSet,
    build_prototypes,
    classify_dataset,
    knn_classify,
    model_predict,
    pbc_classify,
)
from protokws.command import Param, command
from protokws.config import DEFAULT_SEED, derive_seed
from protokws.datamodel import Manifest, load_dataset, load_manifest
from protokws.encoder import EncoderCheckpoint, init_encoder, load_checkpoint, save_checkpoint
from protokws.errors import (
    DataError,
    KwsError,
    NumericError,
    UsageError,
)
from protokws.evaluation import EvalReport, compute_score, evaluate_predictions, tally_outcomes
from protokws.losses import LossSetting, ce_loss, combined_loss, ctc_loss, scl_loss
from protokws.trainer import StagePlan, TrainConfig, run_three_stage, train_stage

__version__ = "0.1.0"

__all__ = [
    # Command decorator
    "command",
    "Param",

    # Configuration
    "DEFAULT_SEED",
    "derive_seed",

    # Data
    "Manifest",
    "load_dataset",
    "load_manifest",

    # Encoder
    "EncoderCheckpoint",
    "init_encoder",
    "load_checkpoint",
    "save_checkpoint",

    # Losses and training
    "LossSetting",
    "ce_loss",
    "combined_loss",
    "ctc_loss",
    "scl_loss",
    "StagePlan",
    "TrainConfig",
    "run_three_stage",
    "train_stage",

    # Classification and scoring
    "PrototypeSet",
    "build_prototypes",
    "classify_dataset",
    "knn_classify",
    "model_predict",
    "pbc_classify",
    "EvalReport",
    "compute_score",
    "evaluate_predictions",
    "tally_outcomes",

    # Errors
    "KwsError",
    "UsageError",
    "DataError",
    "NumericError",
]

from dataclasses import dataclass, field
from typing import List

from loguru import logger

from protokws.datamodel.models import Stage
from protokws.encoder.checkpoint import EncoderCheckpoint
from protokws.errors import SpeakerLeakage
from protokws.trainer.loop import EpochRecord, TrainConfig, TrainingData, train_stage


@dataclass
class StagePlan:
    """
    Data and settings for the three fine-tuning stages.

    stage1_data is control speech, stage2_data uncontrol (or merged) dysarthric
    speech and stage3_data the target speaker's enrollment set.
    """

    stage1_data: TrainingData
    stage2_data: TrainingData
    stage3_data: TrainingData
    stage1: TrainConfig = field(default_factory=TrainConfig)
    stage2: TrainConfig = field(default_factory=TrainConfig)
    stage3: TrainConfig = field(default_factory=TrainConfig)

    def check_disjoint(self) -> None:
        """
        Raises:
            SpeakerLeakage: If a target speaker also appears in stage 1 or 2 data.
        """
        targets = set(self.stage3_data.speakers)
        leaked = targets & (set(self.stage1_data.speakers) | set(self.stage2_data.speakers))
        if leaked:
            raise SpeakerLeakage(
                "Target speakers must not appear in stage 1 or 2 training data",
                f"leaked speakers: {sorted(leaked)}",
            )


@dataclass
class StageResult:
    sic: EncoderCheckpoint
    sid: EncoderCheckpoint
    sdd: EncoderCheckpoint
    histories: List[List[EpochRecord]]


def run_three_stage(plan: StagePlan, init: EncoderCheckpoint) -> StageResult:
    """Train SIC from init, SID from SIC and SDD from SID."""
    plan.check_disjoint()
    logger.info("Stage 1: speaker-independent control model")
    sic, sic_history = train_stage(init, plan.stage1_data, plan.stage1, Stage.SIC)
    logger.info("Stage 2: speaker-independent dysarthria model")
    sid, sid_history = train_stage(sic, plan.stage2_data, plan.stage2, Stage.SID)
    logger.info("Stage 3: speaker-dependent dysarthria model")
    sdd, sdd_history = train_stage(sid, plan.stage3_data, plan.stage3, Stage.SDD)
    return StageResult(sic=sic, sid=sid, sdd=sdd, histories=[sic_history, sid_history, sdd_history])

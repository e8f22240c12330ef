"""
End-to-end workflow: synthesize the corpora, run the three fine-tuning
stages, enroll every target speaker and score each classification method
on the pooled target evaluation set.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from loguru import logger
from pydantic import Field

from protokws.classify.methods import Prediction, classify_dataset
from protokws.classify.predictions import prediction_rows, write_predictions
from protokws.classify.prototypes import build_enrollment_index, build_prototypes, save_prototypes
from protokws.config import ConfigModel, derive_seed
from protokws.datamodel.features import FeatureDataset, load_dataset
from protokws.datamodel.manifest import (
    Manifest,
    load_manifest,
    merge_datasets,
    split_enrollment,
    write_manifest,
)
from protokws.datamodel.models import FeatureMode, Head, Method, Role, Split, Stage
from protokws.encoder.checkpoint import EncoderCheckpoint, checkpoint_digest, save_checkpoint
from protokws.encoder.network import init_encoder
from protokws.errors import IoFailure
from protokws.evaluation.metrics import OutcomeCounts, pool_counts, tally_outcomes
from protokws.evaluation.report import EvalReport, write_report
from protokws.losses.combined import LossBase
from protokws.synthcorpus.generator import (
    CorpusConfig,
    generate_augment_keywords,
    generate_corpus,
)
from protokws.trainer.loop import TrainConfig, train_stage, write_history
from protokws.trainer.stages import StagePlan

PathLike = Union[str, Path]

REPORT_NAMES = (
    "untrained-model",
    "SIC-pbc",
    "SID-pbc",
    "SID-model",
    "SDD-pbc",
    "SDD-knn",
    "SDD-model",
)


def _stage_defaults(peak_lr: float, warmup_steps: int, max_epochs: int) -> TrainConfig:
    return TrainConfig(
        peak_lr=peak_lr,
        warmup_steps=warmup_steps,
        batch_size=16,
        patience_epochs=10,
        max_epochs=max_epochs,
    )


class PipelineConfig(ConfigModel):
    """Everything the end-to-end run needs apart from the master seed."""

    corpus: CorpusConfig = CorpusConfig()
    n_control: int = Field(default=4, ge=1)
    n_uncontrol: int = Field(default=4, ge=1)
    n_targets: int = Field(default=1, ge=1)
    train_samples_per_class: int = Field(default=6, ge=1)
    enroll_samples_per_class: int = Field(default=6, ge=2)
    eval_samples_per_class: int = Field(default=18, ge=1)
    hidden: int = Field(default=32, ge=1)
    emb: int = Field(default=16, ge=1)
    stage1: TrainConfig = _stage_defaults(3e-3, 100, 30)
    stage2: TrainConfig = _stage_defaults(3e-3, 100, 60)
    stage3: TrainConfig = _stage_defaults(1e-3, 20, 30)
    # Stage 1 on control speech plus the TTS keywords.
    augment_stage1: bool = False
    # Stage 2 on control, uncontrol and TTS keywords together.
    merge_train: bool = False
    augment_per_keyword: int = Field(default=8, ge=1)
    enroll_train_fraction: float = Field(default=0.8, gt=0.0, lt=1.0)
    knn_k: int = Field(default=1, ge=1)
    feature_mode: FeatureMode = FeatureMode.FIRST_FRAME


def speaker_ids(prefix: str, count: int) -> List[str]:
    return [f"{prefix}{i:02d}" for i in range(1, count + 1)]


@dataclass
class DataLayout:
    """Manifest paths written by generate_pipeline_data."""

    control: Path
    uncontrol: Path
    enroll: Dict[str, Path]
    evaluation: Dict[str, Path]
    augment: Optional[Path] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "control": str(self.control),
            "uncontrol": str(self.uncontrol),
            "augment": str(self.augment) if self.augment else None,
            "enroll": {t: str(p) for t, p in self.enroll.items()},
            "eval": {t: str(p) for t, p in self.evaluation.items()},
        }


def generate_pipeline_data(config: PipelineConfig, seed: int, out_dir: PathLike) -> DataLayout:
    """Write every manifest and feature file the pipeline consumes under out_dir."""
    root = Path(out_dir)
    corpus = config.corpus.updated(seed=derive_seed(seed, "corpus"))

    def generate(
        role: Role, speakers: List[str], per_class: int, split: Split, path: Path
    ) -> Path:
        sized = corpus.updated(samples_per_class=per_class)
        manifest = generate_corpus(sized, role, speakers, root, split)
        write_manifest(manifest, path)
        return path

    n_train = config.train_samples_per_class
    layout = DataLayout(
        control=generate(
            Role.CONTROL, speaker_ids("C", config.n_control), n_train, Split.TRAIN,
            root / "control.jsonl",
        ),
        uncontrol=generate(
            Role.UNCONTROL, speaker_ids("U", config.n_uncontrol), n_train, Split.TRAIN,
            root / "uncontrol.jsonl",
        ),
        enroll={},
        evaluation={},
    )
    for target in speaker_ids("T", config.n_targets):
        layout.enroll[target] = generate(
            Role.TARGET_ENROLL, [target], config.enroll_samples_per_class, Split.TRAIN,
            root / f"enroll_{target}.jsonl",
        )
        layout.evaluation[target] = generate(
            Role.TARGET_EVAL, [target], config.eval_samples_per_class, Split.TEST,
            root / f"eval_{target}.jsonl",
        )
    if config.merge_train or config.augment_stage1:
        augment = generate_augment_keywords(corpus, config.augment_per_keyword, root)
        layout.augment = root / "augment.jsonl"
        write_manifest(augment, layout.augment)
    logger.info(f"Wrote pipeline data under {root}")
    return layout


def _head_for(config: TrainConfig) -> Head:
    return Head.CTC if config.loss_setting.base is LossBase.CTC else Head.CE


def _seeded(config: TrainConfig, seed: int, label: str) -> TrainConfig:
    return config.updated(seed=derive_seed(seed, label))


@dataclass
class _Scorer:
    """Accumulates per-target predictions for one method and pools them."""

    method: str
    checkpoints: List[str] = field(default_factory=list)
    counts: List[OutcomeCounts] = field(default_factory=list)

    def add(
        self, ckpt: EncoderCheckpoint, dataset: FeatureDataset, preds: List[Prediction]
    ) -> None:
        digest = checkpoint_digest(ckpt)
        if digest not in self.checkpoints:
            self.checkpoints.append(digest)
        self.counts.append(tally_outcomes(preds, dataset.labels))

    def report(self) -> EvalReport:
        return EvalReport.from_counts(
            pool_counts(self.counts), method=self.method, checkpoint=",".join(self.checkpoints)
        )


def run_pipeline(
    config: PipelineConfig, seed: int, out_dir: PathLike, threads: int = 1
) -> Dict[str, Any]:
    """
    Run data generation, the three stages, enrollment, classification and scoring.

    Returns:
        The summary also written to out_dir/summary.json.
    """
    root = Path(out_dir)
    layout = generate_pipeline_data(config, seed, root / "data")
    control = load_manifest(layout.control, Role.CONTROL)
    uncontrol = load_manifest(layout.uncontrol, Role.UNCONTROL)
    stage1_manifest: Manifest = control
    stage2_manifest: Manifest = uncontrol
    if layout.augment is not None:
        augment = load_manifest(layout.augment, Role.CONTROL)
        if config.augment_stage1:
            stage1_manifest = merge_datasets([control, augment])
        if config.merge_train:
            stage2_manifest = merge_datasets([control, uncontrol, augment])

    stage1_data = load_dataset(stage1_manifest)
    stage2_data = load_dataset(stage2_manifest)
    targets: Dict[str, Tuple[Manifest, FeatureDataset]] = {}
    for target in layout.enroll:
        enroll = load_manifest(layout.enroll[target], Role.TARGET_ENROLL)
        StagePlan(stage1_manifest, stage2_manifest, enroll).check_disjoint()
        eval_manifest = load_manifest(layout.evaluation[target], Role.TARGET_EVAL, Split.TEST)
        evaluation = load_dataset(eval_manifest)
        targets[target] = (enroll, evaluation)

    init_seed = derive_seed(seed, "init")
    init = EncoderCheckpoint(
        params=init_encoder(stage1_data.feature_dim, config.hidden, config.emb, init_seed),
        stage=Stage.PRETRAIN,
        seed=init_seed,
    )
    ckpt_dir = root / "checkpoints"
    save_checkpoint(init, ckpt_dir / "pretrain.pkwc")

    stage1 = _seeded(config.stage1, seed, "train:SIC")
    sic, sic_history = train_stage(init, stage1_data, stage1, Stage.SIC)
    save_checkpoint(sic, ckpt_dir / "SIC.pkwc")
    write_history(sic_history, root / "losses" / "SIC.csv")
    stage2 = _seeded(config.stage2, seed, "train:SID")
    sid, sid_history = train_stage(sic, stage2_data, stage2, Stage.SID)
    save_checkpoint(sid, ckpt_dir / "SID.pkwc")
    write_history(sid_history, root / "losses" / "SID.csv")

    scorers: Dict[str, _Scorer] = {name: _Scorer(name) for name in REPORT_NAMES}
    split_seed = derive_seed(seed, "split")
    mode = config.feature_mode
    for target, (enroll, evaluation) in targets.items():
        enroll_data = load_dataset(enroll)
        enroll_train, _ = split_enrollment(enroll, config.enroll_train_fraction, split_seed)
        stage3 = _seeded(config.stage3, seed, f"train:SDD:{target}")
        sdd, sdd_history = train_stage(sid, enroll_train, stage3, Stage.SDD)
        save_checkpoint(sdd, ckpt_dir / f"SDD_{target}.pkwc")
        write_history(sdd_history, root / "losses" / f"SDD_{target}.csv")

        def score(
            name: str, ckpt: EncoderCheckpoint, method: Method, head: Head = Head.CE
        ) -> None:
            protos = index = None
            if method is Method.PBC:
                protos = build_prototypes(enroll_data, ckpt, mode)
                save_prototypes(protos, root / "prototypes" / f"{name}_{target}.json")
            elif method is Method.KNN:
                index = build_enrollment_index(enroll_data, ckpt, mode)
            preds = classify_dataset(
                evaluation, ckpt, method, protos=protos, enroll=index, k=config.knn_k,
                head=head, mode=mode, threads=threads,
            )
            write_predictions(
                prediction_rows(evaluation.utt_ids, preds),
                root / "predictions" / f"{name}_{target}.tsv",
            )
            scorers[name].add(ckpt, evaluation, preds)

        score("untrained-model", init, Method.MODEL, _head_for(config.stage1))
        score("SIC-pbc", sic, Method.PBC)
        score("SID-pbc", sid, Method.PBC)
        score("SID-model", sid, Method.MODEL, _head_for(config.stage2))
        score("SDD-pbc", sdd, Method.PBC)
        score("SDD-knn", sdd, Method.KNN)
        score("SDD-model", sdd, Method.MODEL, _head_for(config.stage3))

    reports: Dict[str, Dict[str, Any]] = {}
    for name, scorer in scorers.items():
        report = scorer.report()
        write_report(report, root / "reports" / f"{name}.json")
        reports[name] = report.to_dict()

    summary = {
        "seed": seed,
        "targets": list(targets),
        "training_utterances": {"SIC": len(stage1_data), "SID": len(stage2_data)},
        "checkpoints": {
            "pretrain": checkpoint_digest(init),
            "SIC": checkpoint_digest(sic),
            "SID": checkpoint_digest(sid),
        },
        "scores": {name: r["score"] for name, r in reports.items()},
        "reports": reports,
    }
    summary_path = root / "summary.json"
    try:
        summary_path.write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    except OSError as e:
        raise IoFailure(f"Cannot write pipeline summary {summary_path}", str(e)) from e
    logger.info(f"Pipeline finished; scores: {summary['scores']}")
    return summary

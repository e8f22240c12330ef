from pathlib import Path
from typing import Any, Dict, Optional

from protokws.classify.methods import classify_dataset
from protokws.classify.predictions import prediction_rows, read_predictions, write_predictions
from protokws.classify.prototypes import (
    build_enrollment_index,
    build_prototypes,
    load_prototypes,
    save_prototypes,
)
from protokws.cli.base import CommandProvider
from protokws.command import Param, command
from protokws.config import THREADS, derive_seed, load_config
from protokws.datamodel.features import load_dataset
from protokws.datamodel.manifest import (
    load_manifest,
    manifest_digest,
    merge_datasets,
    write_manifest,
)
from protokws.datamodel.models import FeatureMode, Head, Method, Stage
from protokws.encoder.checkpoint import (
    EncoderCheckpoint,
    checkpoint_digest,
    load_checkpoint,
    save_checkpoint,
)
from protokws.encoder.network import init_encoder
from protokws.errors import InvalidConfig, LengthMismatch, MalformedRecord
from protokws.evaluation.report import evaluate_predictions, write_report
from protokws.losses.combined import LossSetting
from protokws.pipeline import PipelineConfig, generate_pipeline_data, run_pipeline
from protokws.trainer.loop import TrainConfig, train_stage, write_history

_METHODS = [m.value for m in Method]
_HEADS = [h.value for h in Head]
_MODES = [m.value for m in FeatureMode]
_STAGES = [Stage.SIC.value, Stage.SID.value, Stage.SDD.value]
_LOSSES = ["ce", "ctc", "ce+scl", "ctc+scl"]


def _out_dir(params: Dict[str, Any]) -> Path:
    if not params.get("out"):
        raise InvalidConfig("--out is required: every output goes under a user-supplied directory")
    return Path(params["out"])


def _threads(params: Dict[str, Any]) -> int:
    threads = params.get("threads")
    if threads is None:
        return THREADS.value()
    if threads < 1:
        raise InvalidConfig(f"--threads must be >= 1, got {threads}")
    return int(threads)


def _next_stage(stage: Stage) -> Stage:
    order = list(Stage)
    return order[min(order.index(stage) + 1, len(order) - 1)]


def _seed_label(stage: Stage, speakers: list) -> str:
    if stage is Stage.SDD and len(speakers) == 1:
        return f"train:SDD:{speakers[0]}"
    return f"train:{stage.value}"


class KwsCommands(CommandProvider):
    @command(
        name="gen-data",
        desc="Write the synthetic control, uncontrol, enrollment and evaluation corpora",
        params=[
            Param(name="config", description="PipelineConfig JSON file"),
        ],
    )
    def gen_data(params: Dict[str, Any]) -> Dict[str, Any]:
        config = load_config(PipelineConfig, params.get("config"))
        layout = generate_pipeline_data(config, params["seed"], _out_dir(params))
        return {"manifests": layout.to_dict()}

    @command(
        name="merge",
        desc="Concatenate training manifests, e.g. control or dysarthric data with TTS keywords",
        params=[
            Param(
                name="parts",
                description="Comma-separated manifests, merged in the given order",
                required=True,
            ),
        ],
    )
    def merge(params: Dict[str, Any]) -> Dict[str, Any]:
        paths = [p.strip() for p in params["parts"].split(",") if p.strip()]
        if len(paths) < 2:
            raise InvalidConfig("--parts needs at least two manifests")
        merged = merge_datasets([load_manifest(p) for p in paths])
        path = _out_dir(params) / "merged.jsonl"
        write_manifest(merged, path)
        return {
            "manifest": str(path),
            "n_utterances": len(merged),
            "classes": {str(c): n for c, n in merged.class_histogram().items()},
        }

    @command(
        name="train",
        desc="Fine-tune an encoder on one manifest and write its checkpoint and loss history",
        params=[
            Param(name="data", description="Training manifest", required=True),
            Param(name="init", description="Starting checkpoint; a fresh encoder if omitted"),
            Param(name="config", description="TrainConfig JSON file"),
            Param(name="loss", description="Loss setting", choices=_LOSSES),
            Param(name="stage", description="Tag for the produced checkpoint", choices=_STAGES),
            Param(name="hidden", type="integer", description="Fresh encoder width", default=32),
            Param(name="emb", type="integer", description="Fresh embedding width", default=16),
        ],
    )
    def train(params: Dict[str, Any]) -> Dict[str, Any]:
        out = _out_dir(params)
        seed = params["seed"]
        config = load_config(TrainConfig, params.get("config"))
        if params.get("loss"):
            config = config.updated(loss_setting=LossSetting.parse(params["loss"]))
        data = load_dataset(load_manifest(params["data"]))

        init: EncoderCheckpoint
        if params.get("init"):
            init = load_checkpoint(params["init"])
        else:
            init_seed = derive_seed(seed, "init")
            init = EncoderCheckpoint(
                params=init_encoder(data.feature_dim, params["hidden"], params["emb"], init_seed),
                stage=Stage.PRETRAIN,
                seed=init_seed,
            )
        stage = Stage(params["stage"]) if params.get("stage") else _next_stage(init.stage)
        config = config.updated(seed=derive_seed(seed, _seed_label(stage, data.speakers)))

        ckpt, history = train_stage(init, data, config, stage)
        ckpt_path = out / f"{stage.value}.pkwc"
        history_path = out / f"{stage.value}_loss.csv"
        save_checkpoint(ckpt, ckpt_path)
        write_history(history, history_path)
        return {
            "checkpoint": str(ckpt_path),
            "digest": checkpoint_digest(ckpt),
            "loss_history": str(history_path),
            "epochs": len(history),
            "best_loss": min(r.mean_loss for r in history),
        }

    @command(
        name="enroll",
        desc="Build the eleven class prototypes from enrollment speech",
        params=[
            Param(name="ckpt", description="Encoder checkpoint", required=True),
            Param(name="enroll", description="Enrollment manifest", required=True),
            Param(
                name="feature_mode",
                description="Utterance embedding",
                choices=_MODES,
                default=FeatureMode.FIRST_FRAME.value,
            ),
        ],
    )
    def enroll(params: Dict[str, Any]) -> Dict[str, Any]:
        out = _out_dir(params)
        ckpt = load_checkpoint(params["ckpt"])
        manifest = load_manifest(params["enroll"])
        protos = build_prototypes(manifest, ckpt, FeatureMode(params["feature_mode"]))
        path = out / "prototypes.json"
        save_prototypes(protos, path)
        return {"prototypes": str(path), "checkpoint": protos.checkpoint, "enroll": protos.enroll}

    @command(
        name="classify",
        desc="Classify every utterance of a manifest and write a predictions TSV",
        params=[
            Param(name="ckpt", description="Encoder checkpoint", required=True),
            Param(name="data", description="Manifest to classify", required=True),
            Param(name="method", description="Classifier", choices=_METHODS, required=True),
            Param(name="protos", description="Prototype file (pbc)"),
            Param(name="enroll", description="Enrollment manifest (knn)"),
            Param(name="k", type="integer", description="Neighbours (knn)", default=1),
            Param(name="head", description="Output head (model)", choices=_HEADS, default="ce"),
            Param(
                name="feature_mode",
                description="Utterance embedding (knn)",
                choices=_MODES,
                default=FeatureMode.FIRST_FRAME.value,
            ),
        ],
    )
    def classify(params: Dict[str, Any]) -> Dict[str, Any]:
        out = _out_dir(params)
        method = Method(params["method"])
        ckpt = load_checkpoint(params["ckpt"])
        dataset = load_dataset(load_manifest(params["data"]))
        mode = FeatureMode(params["feature_mode"])

        protos = index = None
        if method is Method.PBC:
            if not params.get("protos"):
                raise InvalidConfig("--protos is required for --method pbc")
            protos = load_prototypes(params["protos"])
        elif method is Method.KNN:
            if not params.get("enroll"):
                raise InvalidConfig("--enroll is required for --method knn")
            index = build_enrollment_index(load_manifest(params["enroll"]), ckpt, mode)

        predictions = classify_dataset(
            dataset,
            ckpt,
            method,
            protos=protos,
            enroll=index,
            k=params["k"],
            head=Head(params["head"]),
            mode=mode,
            threads=_threads(params),
        )
        path = out / "predictions.tsv"
        write_predictions(prediction_rows(dataset.utt_ids, predictions), path)
        return {"predictions": str(path), "n_utterances": len(predictions), "method": method.value}

    @command(
        name="evaluate",
        desc="Score predictions against gold labels (Score = FAR + FRR)",
        params=[
            Param(name="pred", description="Predictions TSV", required=True),
            Param(name="gold", description="Gold manifest", required=True),
            Param(name="method", description="Method tag for the report", default=""),
            Param(name="ckpt", description="Checkpoint whose digest tags the report"),
        ],
    )
    def evaluate(params: Dict[str, Any]) -> Dict[str, Any]:
        out = _out_dir(params)
        rows = read_predictions(params["pred"])
        gold = load_manifest(params["gold"])
        if len(rows) != len(gold):
            raise LengthMismatch(
                f"{len(rows)} predictions but {len(gold)} gold utterances",
                f"pred={params['pred']} gold={params['gold']}",
            )
        for row, record in zip(rows, gold.records):
            if row.utt_id != record.utt_id:
                raise MalformedRecord(
                    f"Prediction for {row.utt_id!r} is aligned with gold {record.utt_id!r}"
                )
        checkpoint: Optional[str] = None
        if params.get("ckpt"):
            checkpoint = checkpoint_digest(load_checkpoint(params["ckpt"]))

        report = evaluate_predictions(
            [row.predicted_label for row in rows],
            [record.label for record in gold.records],
            method=params["method"],
            checkpoint=checkpoint or "",
        )
        path = out / "report.json"
        write_report(report, path)
        return {"report": str(path), "gold": manifest_digest(gold), **report.to_dict()}

    @command(
        name="pipeline",
        desc="Generate data, train SIC, SID and SDD, then enroll, classify and score",
        params=[
            Param(name="config", description="PipelineConfig JSON file"),
        ],
    )
    def pipeline(params: Dict[str, Any]) -> Dict[str, Any]:
        config = load_config(PipelineConfig, params.get("config"))
        summary = run_pipeline(config, params["seed"], _out_dir(params), _threads(params))
        return {"summary": str(_out_dir(params) / "summary.json"), "scores": summary["scores"]}

    @command(
        name="inspect",
        desc="Print checkpoint metadata",
        params=[
            Param(name="ckpt", description="Encoder checkpoint", required=True),
        ],
    )
    def inspect(params: Dict[str, Any]) -> Dict[str, Any]:
        return load_checkpoint(params["ckpt"]).metadata()

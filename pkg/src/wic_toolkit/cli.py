"""Command-line entry points for the full experiment pipeline.

Subcommands:

* ``prepare``  merge raw datasets and write a lemma-disjoint split
* ``train``    fine-tune an encoder/head pair and calibrate its threshold
* ``predict``  score a data file with a checkpoint, emit a submission
* ``evaluate`` score a submission against gold labels
* ``analyze``  error groupings and cross-model error intersection
* ``synth``    generate a synthetic corpus for smoke runs

Experiments are driven by JSON config files (see configs/ in the repo);
individual flags override config values. Exit codes: 0 success, 1
usage/config error, 2 data error, 3 runtime/numeric error.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import os
import sys
from pathlib import Path

from . import datasets as ds
from . import evaluation as ev
from .calibration import fixed_threshold, roc_curve, youden_threshold
from .errors import (
    AlignmentError,
    CalibrationError,
    ConfigError,
    DataFormatError,
    DegenerateEmbeddingError,
    EncoderRegistryError,
    EvaluationError,
    GoldJoinError,
    MergeError,
    OutputLockError,
    SpanValidationError,
    SplitError,
    TrainingError,
    WicError,
)
from .heads import (
    CosineHead,
    CosineHeadConfig,
    MlpHeadConfig,
    build_head,
    decide,
    head_config_from_json,
)
from .registry import create_encoder
from .synthetic import make_corpus, write_mclwic_files
from .training import (
    TrainConfig,
    load_checkpoint,
    make_checkpoint,
    predict_scores,
    save_checkpoint,
    score_pair,
    train,
    train_config_from_json,
)

_HEAD_FLAGS = {
    "mlp": MlpHeadConfig(use_sentence_vectors=False),
    "mlp+cls": MlpHeadConfig(use_sentence_vectors=True),
    "cosine-relu": CosineHeadConfig(activation="relu"),
    "cosine-sigmoid": CosineHeadConfig(activation="sigmoid"),
}

_USAGE_EXIT = 1
_DATA_EXIT = 2
_RUNTIME_EXIT = 3

_DATA_ERRORS = (
    DataFormatError,
    GoldJoinError,
    SpanValidationError,
    MergeError,
    SplitError,
    EvaluationError,
    FileNotFoundError,
)
_USAGE_ERRORS = (ConfigError, EncoderRegistryError, OutputLockError)


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors by default; this toolkit reserves
    # 2 for data errors.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(_USAGE_EXIT, f"{self.prog}: error: {message}\n")


@contextlib.contextmanager
def _output_lock(directory: Path):
    """Guard an output directory against concurrent runs."""
    directory.mkdir(parents=True, exist_ok=True)
    lock = directory / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise OutputLockError(
            f"output directory {directory} is locked by another run "
            f"(delete {lock} if that run is dead)"
        ) from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        lock.unlink(missing_ok=True)


def _load_config(path: str, allowed: dict[str, set[str] | None], required: set[str]) -> dict:
    """Read a JSON config and reject unknown keys, including nested ones."""
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"config file not found: {p}")
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: malformed JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{p}: config must be a JSON object")
    unknown = set(doc) - set(allowed)
    if unknown:
        raise ConfigError(f"{p}: unknown config keys: {sorted(unknown)}")
    missing = required - set(doc)
    if missing:
        raise ConfigError(f"{p}: missing config keys: {sorted(missing)}")
    for key, subkeys in allowed.items():
        if subkeys is not None and key in doc:
            if not isinstance(doc[key], dict):
                raise ConfigError(f"{p}: key {key!r} must be an object")
            sub_unknown = set(doc[key]) - subkeys
            if sub_unknown:
                raise ConfigError(
                    f"{p}: unknown keys under {key!r}: {sorted(sub_unknown)}"
                )
    return doc


def _require_file(path: str | Path, role: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"{role} not found: {p}")
    return p


# --- prepare ----------------------------------------------------------------

_PREPARE_KEYS: dict[str, set[str] | None] = {
    "mclwic_train_data": None,
    "mclwic_train_gold": None,
    "mclwic_dev_data": None,
    "mclwic_dev_gold": None,
    "superglue_train": None,
    "superglue_dev": None,
    "split": {"train_fraction", "seed"},
    "output_dir": None,
}


def cmd_prepare(args) -> int:
    config = _load_config(
        args.config,
        _PREPARE_KEYS,
        required={"mclwic_train_data", "mclwic_train_gold", "output_dir"},
    )
    out_dir = Path(args.output or config["output_dir"])
    split_doc = dict(config.get("split", {}))
    if args.seed is not None:
        split_doc["seed"] = args.seed
    split_config = ds.SplitConfig(
        train_fraction=split_doc.get("train_fraction", 0.975),
        seed=split_doc.get("seed", 0),
    )

    mclwic_train = ds.load_mclwic(
        _require_file(config["mclwic_train_data"], "MCL-WiC train data"),
        _require_file(config["mclwic_train_gold"], "MCL-WiC train gold"),
        source="mclwic-train",
    )

    with _output_lock(out_dir):
        if args.no_extra_data:
            if "mclwic_dev_data" not in config or "mclwic_dev_gold" not in config:
                raise ConfigError(
                    "--no-extra-data needs mclwic_dev_data and mclwic_dev_gold "
                    "for the validation side"
                )
            validation = ds.load_mclwic(
                _require_file(config["mclwic_dev_data"], "MCL-WiC dev data"),
                _require_file(config["mclwic_dev_gold"], "MCL-WiC dev gold"),
                source="mclwic-dev",
            )
            train_corpus, val_corpus = mclwic_train, validation
            seed = fraction = None
        else:
            corpora = [mclwic_train]
            if "mclwic_dev_data" in config:
                corpora.append(
                    ds.load_mclwic(
                        _require_file(config["mclwic_dev_data"], "MCL-WiC dev data"),
                        _require_file(config["mclwic_dev_gold"], "MCL-WiC dev gold"),
                        source="mclwic-dev",
                    )
                )
            for key, source in (
                ("superglue_train", "superglue-train"),
                ("superglue_dev", "superglue-dev"),
            ):
                if key in config:
                    corpora.append(
                        ds.load_superglue_wic(
                            _require_file(config[key], f"SuperGLUE file {key}"),
                            source=source,
                        )
                    )
            merged = ds.merge(corpora)
            train_corpus, val_corpus = ds.split_by_lemma(merged, split_config)
            seed, fraction = split_config.seed, split_config.train_fraction

        ds.save_corpus(train_corpus, out_dir / "train.json")
        ds.save_corpus(val_corpus, out_dir / "validation.json")
        ds.save_split_manifest(
            out_dir / "manifest.json", train_corpus, val_corpus, seed, fraction
        )
    print(
        f"prepared {len(train_corpus)} train / {len(val_corpus)} validation "
        f"pairs -> {out_dir}"
    )
    return 0


# --- train ------------------------------------------------------------------

_TRAIN_KEYS: dict[str, set[str] | None] = {
    "encoder": {"name", "kwargs"},
    "head": {"type", "hidden_units", "use_sentence_vectors", "activation"},
    "train": {
        "batch_size",
        "max_tokens",
        "learning_rate",
        "optimizer",
        "max_epochs",
        "checks_per_epoch",
        "patience_checks",
        "seed",
        "prediction_clamp_epsilon",
        "adam_betas",
        "adam_epsilon",
        "weight_decay",
        "freeze_encoder",
    },
    "data": {"train_corpus", "validation_corpus"},
    "output_dir": None,
}


def cmd_train(args) -> int:
    config = _load_config(
        args.config, _TRAIN_KEYS, required={"encoder", "head", "data", "output_dir"}
    )
    out_dir = Path(args.output or config["output_dir"])
    train_doc = dict(config.get("train", {}))
    if args.seed is not None:
        train_doc["seed"] = args.seed
    train_config = train_config_from_json(train_doc)

    encoder_doc = dict(config["encoder"])
    if args.encoder is not None:
        encoder_doc["name"] = args.encoder
    encoder_spec = {
        "name": encoder_doc.get("name"),
        "kwargs": encoder_doc.get("kwargs", {}),
    }
    head_config = (
        _HEAD_FLAGS[args.head]
        if args.head is not None
        else head_config_from_json(config["head"])
    )

    train_corpus = ds.load_corpus(
        _require_file(config["data"]["train_corpus"], "train corpus")
    )
    val_corpus = ds.load_corpus(
        _require_file(config["data"]["validation_corpus"], "validation corpus")
    )

    encoder = create_encoder(encoder_spec["name"], **encoder_spec["kwargs"])
    dtype = next(encoder.parameters()).dtype
    head = build_head(head_config, encoder.dimension, seed=train_config.seed, dtype=dtype)

    with _output_lock(out_dir):
        frozen_cosine = train_config.freeze_encoder and isinstance(head, CosineHead)
        if frozen_cosine:
            # Nothing to optimize: score with pretrained weights, calibrate only.
            checkpoint = make_checkpoint(
                encoder, head, train_config, encoder_spec, head_config
            )
            summary = "frozen-encoder baseline (no training)"
        else:
            checkpoint, history = train(
                encoder,
                head,
                train_corpus,
                val_corpus,
                train_config,
                encoder_spec=encoder_spec,
                head_config=head_config,
            )
            summary = (
                f"epochs {history.epochs_completed:g}, "
                f"best check {history.best_check}/{history.total_checks}, "
                f"best val loss {min(r.validation_loss for r in history.records):.4f}"
            )

        if isinstance(head, CosineHead):
            labels = val_corpus.labels()
            unlabeled = [i for i, y in labels.items() if y is None]
            if unlabeled:
                raise CalibrationError(
                    f"validation corpus has unlabeled pairs (e.g. "
                    f"{unlabeled[0]!r}); cannot calibrate a threshold"
                )
            scored = predict_scores(checkpoint, val_corpus, train_config)
            checkpoint.calibration = youden_threshold(
                roc_curve([s for _, s in scored], [labels[i] for i, _ in scored])
            )
        else:
            checkpoint.calibration = fixed_threshold()

        save_checkpoint(checkpoint, out_dir)
        ds.save_split_manifest(
            out_dir / "manifest.json", train_corpus, val_corpus, None, None
        )
    print(
        f"trained -> {out_dir} ({summary}; "
        f"threshold {checkpoint.calibration.threshold:.4f})"
    )
    return 0


# --- predict ----------------------------------------------------------------


def cmd_predict(args) -> int:
    checkpoint = load_checkpoint(_require_file(args.checkpoint, "checkpoint directory"))
    corpus = ds.load_mclwic(_require_file(args.data, "data file"), None, source="predict")
    threshold = checkpoint.threshold

    predictions: list[tuple[str, bool]] = []
    failures: list[dict] = []
    for pair in corpus:  # input order
        try:
            score = score_pair(checkpoint, pair)
        except AlignmentError as exc:
            failures.append({"id": pair.id, "error": str(exc)})
            continue
        predictions.append((pair.id, decide(score, threshold)))

    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    ev.write_submission(out, predictions)
    if failures:
        failures_path = out.with_suffix(".failures.json")
        failures_path.write_text(json.dumps(failures, indent=1) + "\n", encoding="utf-8")
        print(
            f"warning: {len(failures)} pairs failed alignment "
            f"(see {failures_path})",
            file=sys.stderr,
        )
    print(f"wrote {len(predictions)} predictions -> {out}")
    return 0


# --- evaluate / analyze ------------------------------------------------------


def _load_gold_corpus(data_path: str, gold_path: str) -> ds.Corpus:
    return ds.load_mclwic(
        _require_file(data_path, "data file"),
        _require_file(gold_path, "gold file"),
        source="gold",
    )


def cmd_evaluate(args) -> int:
    corpus = _load_gold_corpus(args.data, args.gold)
    predictions = ev.read_submission(_require_file(args.predictions, "predictions file"))
    report = ev.evaluate(predictions, corpus)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(
        json.dumps(ev.report_to_json(report), indent=1) + "\n", encoding="utf-8"
    )
    print(
        f"accuracy {report.accuracy:.4f} "
        f"(TP {report.true_positives}, FP {report.false_positives}, "
        f"TN {report.true_negatives}, FN {report.false_negatives}) -> {out}"
    )
    return 0


def cmd_analyze(args) -> int:
    corpus = _load_gold_corpus(args.data, args.gold)
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)

    reports = []
    used_stems: set[str] = set()
    for pred_path in args.predictions:
        predictions = ev.read_submission(_require_file(pred_path, "predictions file"))
        report = ev.evaluate(predictions, corpus)
        reports.append(report)
        stem = Path(pred_path).stem
        k = 2
        while stem in used_stems:  # two submissions may share a file name
            stem = f"{Path(pred_path).stem}.{k}"
            k += 1
        used_stems.add(stem)
        (out_dir / f"evaluation.{stem}.json").write_text(
            json.dumps(ev.report_to_json(report), indent=1) + "\n", encoding="utf-8"
        )
        groups = ev.shared_first_sentence_errors(report, corpus)
        (out_dir / f"error_groups.{stem}.json").write_text(
            json.dumps(ev.error_groups_to_json(groups), indent=1) + "\n",
            encoding="utf-8",
        )
        print(
            f"{pred_path}: accuracy {report.accuracy:.4f}, "
            f"{len(report.error_ids())} errors, "
            f"{groups.shared_first_sentence_error_count} sharing a first sentence"
        )

    if len(reports) > 1:
        common = sorted(ev.error_intersection(reports))
        (out_dir / "error_intersection.json").write_text(
            json.dumps({"n_reports": len(reports), "intersection": common}, indent=1)
            + "\n",
            encoding="utf-8",
        )
        print(f"errors shared by all {len(reports)} models: {len(common)}")
    return 0


# --- synth --------------------------------------------------------------


def cmd_synth(args) -> int:
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    splits = (
        ("train", args.train_pairs, args.seed, args.noise),
        ("dev", args.dev_pairs, args.seed + 1, args.noise),
        ("test", args.test_pairs, args.seed + 2, 0.0),
    )
    for name, n_pairs, seed, noise in splits:
        corpus = make_corpus(
            n_pairs,
            n_lemmas=args.lemmas,
            seed=seed,
            label_noise=noise,
            id_prefix=f"syn.{name}",
        )
        write_mclwic_files(
            corpus, out_dir / f"{name}.data.json", out_dir / f"{name}.gold.json"
        )
        print(f"wrote {n_pairs} {name} pairs -> {out_dir}/{name}.data.json")
    return 0


# --- entry point --------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="wic",
        description="Word-in-Context disambiguation toolkit",
        epilog=(
            "Pretrained encoder weights are cached under the directory in "
            "the WIC_ENCODER_CACHE environment variable, if set."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="merge datasets and write a lemma split")
    p.add_argument("--config", required=True, help="prepare config JSON")
    p.add_argument("--seed", type=int, default=None, help="override split seed")
    p.add_argument(
        "--no-extra-data",
        action="store_true",
        help="use MCL-WiC train/dev directly; skip merging and splitting",
    )
    p.add_argument("--output", default=None, help="override output directory")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train and calibrate a model")
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--seed", type=int, default=None, help="override training seed")
    p.add_argument("--encoder", default=None, help="override encoder name")
    p.add_argument(
        "--head", choices=sorted(_HEAD_FLAGS), default=None, help="override head"
    )
    p.add_argument("--output", default=None, help="override output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="write a submission file for a data file")
    p.add_argument("--checkpoint", required=True, help="checkpoint directory")
    p.add_argument("--data", required=True, help="MCL-WiC data JSON")
    p.add_argument("--output", required=True, help="submission JSON path")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score a submission against gold labels")
    p.add_argument("--predictions", required=True, help="submission JSON")
    p.add_argument("--data", required=True, help="MCL-WiC data JSON")
    p.add_argument("--gold", required=True, help="MCL-WiC gold JSON")
    p.add_argument("--output", required=True, help="report JSON path")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("analyze", help="error groupings and model intersection")
    p.add_argument(
        "--predictions", required=True, nargs="+", help="one or more submissions"
    )
    p.add_argument("--data", required=True, help="MCL-WiC data JSON")
    p.add_argument("--gold", required=True, help="MCL-WiC gold JSON")
    p.add_argument("--output", required=True, help="output directory for reports")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("synth", help="generate a synthetic corpus for smoke runs")
    p.add_argument("--output", required=True, help="output directory")
    p.add_argument("--train-pairs", type=int, default=500)
    p.add_argument("--dev-pairs", type=int, default=200)
    p.add_argument("--test-pairs", type=int, default=200)
    p.add_argument("--lemmas", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.0)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _USAGE_ERRORS as exc:
        print(f"wic: {exc}", file=sys.stderr)
        return _USAGE_EXIT
    except _DATA_ERRORS as exc:
        print(f"wic: {exc}", file=sys.stderr)
        return _DATA_EXIT
    except (AlignmentError, DegenerateEmbeddingError, CalibrationError, TrainingError, WicError) as exc:
        print(f"wic: {exc}", file=sys.stderr)
        return _RUNTIME_EXIT


if __name__ == "__main__":
    sys.exit(main())

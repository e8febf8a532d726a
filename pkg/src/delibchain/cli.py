"""Command-line surface: one binary, one subcommand per pipeline stage.

Configuration comes from a flat ``key = value`` file; any explicit CLI
flag overrides the file. Every command writes its artifacts atomically
(write-then-rename) together with a run manifest recording the resolved
configuration, its hash, the seed, and the package version, so a re-run
with identical inputs is byte-identical.

Exit codes: 0 success, 2 configuration error, 3 data validation error,
4 numeric failure, 5 external-service failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .annotate import (
    AnnotatorEndpointConfig,
    ReplayClient,
    gold_cluster_mapping,
    goldmap_records,
    http_annotator,
    transcript_text,
)
from .baselines import BaselineSpec, baseline_predict, calibrate
from .corpus import (
    Corpus,
    InterventionLabel,
    SynthConfig,
    chain_size_stat,
    corpus_statistics,
    gold_partition,
    load_corpus,
    synthesize_corpus,
    write_corpus,
)
from .errors import (
    ConfigError,
    DataValidationError,
    DelibchainError,
    ExternalServiceError,
    NumericError,
)
from .features import DEFAULT_EMBED_DIM, HashedBowProvider, file_embed_provider
from .graph import export_chains
from .inference import (
    InferenceConfig,
    audit_records,
    cluster_links,
    partition_records,
    write_jsonl,
)
from .metrics import format_report, score
from .pairs import DEFAULT_CONTEXT_K, DEFAULT_MAX_SEQUENCE_LEN, DEFAULT_WINDOWS, corpus_training_pairs
from .pipeline import ScorerSetup, evaluate_predictions, run_inference, train_scorer
from .scorer import (
    Alphas,
    JointScorerModel,
    PairLabels,
    TrainConfig,
    grad_check,
    load_model,
    save_model,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4
EXIT_EXTERNAL = 5


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

def parse_config_file(path: str | Path) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


class RunConfig:
    """Key=value store with typed access; remembers what was resolved."""

    def __init__(self, values: dict[str, str]):
        self.values = values
        self.resolved: dict = {}

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        values: dict[str, str] = {}
        if getattr(args, "config", None):
            values = parse_config_file(args.config)
        return cls(values)

    def _fetch(self, key: str, override, default, required: bool):
        if override is not None:
            value = override
        elif key in self.values:
            value = self.values[key]
        elif required:
            raise ConfigError(f"missing required config key {key!r}")
        else:
            value = default
        return value

    def get_str(self, key, override=None, default=None, required=False) -> str | None:
        value = self._fetch(key, override, default, required)
        value = None if value is None else str(value)
        self.resolved[key] = value
        return value

    def get_int(self, key, override=None, default=None, required=False) -> int | None:
        value = self._fetch(key, override, default, required)
        try:
            value = None if value is None else int(value)
        except (TypeError, ValueError):
            raise ConfigError(f"config key {key!r} must be an integer, got {value!r}") from None
        self.resolved[key] = value
        return value

    def get_float(self, key, override=None, default=None, required=False) -> float | None:
        value = self._fetch(key, override, default, required)
        try:
            value = None if value is None else float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"config key {key!r} must be a number, got {value!r}") from None
        self.resolved[key] = value
        return value

    def get_bool(self, key, override=None, default=False) -> bool:
        value = self._fetch(key, override, default, required=False)
        if isinstance(value, str):
            lowered = value.lower()
            if lowered in ("1", "true", "yes", "on"):
                value = True
            elif lowered in ("0", "false", "no", "off"):
                value = False
            else:
                raise ConfigError(f"config key {key!r} must be boolean, got {value!r}")
        value = bool(value)
        self.resolved[key] = value
        return value


def atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_manifest(out_dir: Path, command: str, config: RunConfig, seed: int) -> Path:
    resolved = {k: config.resolved[k] for k in sorted(config.resolved)}
    canonical = json.dumps(resolved, sort_keys=True)
    manifest = {
        "command": command,
        "config": resolved,
        "config_hash": hashlib.sha256(canonical.encode("utf-8")).hexdigest(),
        "seed": seed,
        "version": __version__,
    }
    path = out_dir / f"manifest-{command}.json"
    atomic_write_text(path, json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return path


def _out_dir(config: RunConfig, args) -> Path:
    out = config.get_str("out_dir", override=getattr(args, "out_dir", None), required=True)
    return Path(out)


def _seed(config: RunConfig, args) -> int:
    return config.get_int("seed", override=getattr(args, "seed", None), required=True)


def _schema(config: RunConfig, args) -> str:
    schema = config.get_str("schema", override=getattr(args, "schema", None), default="delidata")
    if schema not in ("delidata", "wtd"):
        raise ConfigError(f"schema must be delidata or wtd, got {schema!r}")
    return schema


def _format_for(schema: str) -> str:
    return "delidata-like" if schema == "delidata" else "wtd-like"


def _load_split(config: RunConfig, args, key: str, split: str, schema: str) -> Corpus:
    path = config.get_str(key, override=getattr(args, key, None), required=True)
    if not Path(path).exists():
        raise ConfigError(f"{key} does not exist: {path}")
    return load_corpus(path, format=_format_for(schema), split_name=split)


def _provider(config: RunConfig, args):
    kind = config.get_str(
        "embedding", override=getattr(args, "embedding", None), default="hashed"
    )
    if kind == "hashed":
        dim = config.get_int(
            "embedding_dim",
            override=getattr(args, "embedding_dim", None),
            default=DEFAULT_EMBED_DIM,
        )
        return HashedBowProvider(dimension=dim)
    if kind == "file":
        path = config.get_str("embedding_path", required=True)
        return file_embed_provider(path)
    raise ConfigError(f"unknown embedding provider {kind!r}")


def _window(config: RunConfig, args, schema: str) -> int:
    return config.get_int(
        "window", override=getattr(args, "window", None), default=DEFAULT_WINDOWS[schema]
    )


def _context(config: RunConfig, args) -> tuple[int, int]:
    k = config.get_int("context_k", override=getattr(args, "context_k", None), default=DEFAULT_CONTEXT_K)
    max_len = config.get_int(
        "max_sequence_len",
        override=getattr(args, "max_sequence_len", None),
        default=DEFAULT_MAX_SEQUENCE_LEN,
    )
    return k, max_len


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_synth(args) -> int:
    config = RunConfig.from_args(args)
    out_dir = _out_dir(config, args)
    seed = _seed(config, args)
    schema = _schema(config, args)
    counts = {
        "train": config.get_int("n_train", override=args.n_train, default=100),
        "dev": config.get_int("n_dev", override=args.n_dev, default=20),
        "test": config.get_int("n_test", override=args.n_test, default=20),
    }
    mean_len = config.get_float(
        "mean_dialogue_len", override=args.mean_dialogue_len, default=33.0
    )
    mean_chain = config.get_float("mean_chain_len", override=args.mean_chain_len, default=5.0)
    vocab_seed = config.get_int("vocab_seed", override=args.vocab_seed, default=0)

    for offset, (split, n) in enumerate(counts.items()):
        synth_config = SynthConfig(
            n_dialogues=n,
            mean_dialogue_len=mean_len,
            mean_chain_len=mean_chain,
            vocab_seed=vocab_seed,
            schema=schema,
            split_name=split,
        )
        corpus = synthesize_corpus(synth_config, seed + offset)
        target = out_dir / f"{split}.jsonl"
        out_dir.mkdir(parents=True, exist_ok=True)
        tmp = out_dir / f".{split}.jsonl.stage"
        write_corpus(corpus, tmp)
        os.replace(tmp, target)
        stats = corpus_statistics(corpus)
        print(
            f"{split}: {stats.n_dialogues} dialogues, {stats.n_clusters} chains, "
            f"mean length {stats.mean_dialogue_len:.1f}, mean chain {stats.mean_chain_len:.1f}"
        )
    write_manifest(out_dir, "synth", config, seed)
    return EXIT_OK


def cmd_pairs(args) -> int:
    config = RunConfig.from_args(args)
    out_dir = _out_dir(config, args)
    seed = _seed(config, args)
    schema = _schema(config, args)
    corpus = _load_split(config, args, "train_path", "train", schema)
    window = _window(config, args, schema)
    pairs = corpus_training_pairs(corpus, window)
    rows = [
        {
            "dialogue_id": p.dialogue_id,
            "i": p.i,
            "j": p.j,
            "y": p.link,
            "role_i": p.role_i.value,
            "role_j": p.role_j.value,
        }
        for p in pairs
    ]
    text = "".join(json.dumps(r, sort_keys=True) + "\n" for r in rows)
    atomic_write_text(out_dir / "pairs.jsonl", text)
    positives = sum(p.link for p in pairs)
    print(f"{len(pairs)} pairs ({positives} positive) at window {window}")
    write_manifest(out_dir, "pairs", config, seed)
    return EXIT_OK


def _train_config(config: RunConfig, args, seed: int) -> TrainConfig:
    return TrainConfig(
        batch_size=config.get_int("batch_size", override=args.batch_size, default=24),
        lr_link=config.get_float("lr_link", override=args.lr_link, default=1e-4),
        lr_intervention=config.get_float(
            "lr_intervention", override=args.lr_intervention, default=1e-5
        ),
        epochs=config.get_int("epochs", override=args.epochs, default=16),
        bidirectional=config.get_bool("bidirectional", override=args.bidirectional),
        seed=seed,
    )


def cmd_train(args) -> int:
    config = RunConfig.from_args(args)
    out_dir = _out_dir(config, args)
    seed = _seed(config, args)
    schema = _schema(config, args)
    corpus = _load_split(config, args, "train_path", "train", schema)
    provider = _provider(config, args)
    k, max_len = _context(config, args)
    setup = ScorerSetup(
        window=_window(config, args, schema),
        k=k,
        max_sequence_len=max_len,
        hidden=(config.get_int("hidden", override=args.hidden, default=128),),
        alphas=Alphas(
            link=config.get_float("alpha_link", default=1.0),
            probing=config.get_float("alpha_probing", default=0.01),
            causal=config.get_float("alpha_causal", default=0.01),
        ),
    )
    train_config = _train_config(config, args, seed)
    result = train_scorer(corpus, provider, setup, train_config)
    out_dir.mkdir(parents=True, exist_ok=True)
    staged = out_dir / ".checkpoint.json.stage"
    save_model(result.model, staged, extra={"train_config": config.resolved.copy()})
    os.replace(staged, out_dir / "checkpoint.json")
    atomic_write_text(
        out_dir / "history.json",
        json.dumps({"epoch_mean_loss": result.history}, indent=2) + "\n",
    )
    final = result.history[-1] if result.history else float("nan")
    print(f"trained {train_config.epochs} epochs, final mean loss {final:.4f}")
    write_manifest(out_dir, "train", config, seed)
    return EXIT_OK


def _inference_config(config: RunConfig, args, schema: str, window: int) -> InferenceConfig:
    mode = config.get_str(
        "inference_mode", override=getattr(args, "inference_mode", None), default="windowed"
    )
    mentions = config.get_str("mentions", override=getattr(args, "mentions", None), default="gold")
    threshold = config.get_float(
        "threshold", override=getattr(args, "threshold", None), default=0.5
    )
    k, max_len = _context(config, args)
    chain_size = config.get_float(
        "chain_size", override=getattr(args, "chain_size", None), default=None
    )
    if mode == "naive" and chain_size is None:
        stat = config.get_str(
            "chain_stat", default="mean" if schema == "delidata" else "max"
        )
        train_path = config.get_str("train_path", override=getattr(args, "train_path", None))
        if train_path is None:
            raise ConfigError("naive inference needs chain_size or train_path to derive it")
        train_corpus = load_corpus(train_path, format=_format_for(schema), split_name="train")
        chain_size = chain_size_stat(train_corpus, stat)
    return InferenceConfig(
        mode=mode,
        window=window,
        threshold=threshold,
        k=k,
        max_sequence_len=max_len,
        mentions=mentions,
        chain_size=chain_size,
    )


def cmd_infer(args) -> int:
    config = RunConfig.from_args(args)
    out_dir = _out_dir(config, args)
    seed = _seed(config, args)
    schema = _schema(config, args)
    corpus = _load_split(config, args, "test_path", "test", schema)
    checkpoint = config.get_str("checkpoint", override=args.checkpoint, required=True)
    model = load_model(checkpoint)
    provider = _provider(config, args)
    if provider.dimension != model.feature_dim:
        raise ConfigError(
            f"embedding dimension {provider.dimension} does not match "
            f"checkpoint feature_dim {model.feature_dim}"
        )
    window = _window(config, args, schema)
    inference_config = _inference_config(config, args, schema, window)
    predictions = run_inference(corpus, model, provider, inference_config)

    write_rows = []
    for prediction in predictions:
        write_rows.extend(audit_records(prediction))
    atomic_write_text(
        out_dir / "audit.jsonl",
        "".join(json.dumps(r, sort_keys=True) + "\n" for r in write_rows),
    )
    atomic_write_text(
        out_dir / "partition.jsonl",
        "".join(
            json.dumps(r, sort_keys=True) + "\n" for r in partition_records(predictions)
        ),
    )
    chains = [chain for prediction in predictions for chain in prediction.chains]
    atomic_write_text(out_dir / "chains.jsonl", export_chains(chains))

    report = evaluate_predictions(corpus, predictions)
    atomic_write_text(out_dir / "report.json", report.to_json())
    print(format_report(report), end="")
    write_manifest(out_dir, "infer", config, seed)
    return EXIT_OK


def _read_partition_file(path: str | Path) -> dict[str, set]:
    """Partition from either a corpus file or a partition JSONL file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"partition file does not exist: {path}")
    first = ""
    with path.open(encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                first = line
                break
    record = json.loads(first) if first.lstrip().startswith("{") else {}
    if record.get("record") in ("header", "utterance") or "\t" in first:
        corpus = load_corpus(path)
        return {k: set(v) for k, v in gold_partition(corpus.gold).items()}
    clusters: dict[str, set] = {}
    with path.open(encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            if not line.strip():
                continue
            row = json.loads(line)
            try:
                ref = (row["dialogue_id"], int(row["index"]))
                clusters.setdefault(str(row["cluster"]), set()).add(ref)
            except KeyError as exc:
                raise DataValidationError(f"{path}:{lineno}: missing field {exc}") from None
    return clusters


def cmd_score(args) -> int:
    config = RunConfig.from_args(args)
    gold_path = config.get_str("gold", override=args.gold, required=True)
    pred_path = config.get_str("pred", override=args.pred, required=True)
    report = score(_read_partition_file(gold_path), _read_partition_file(pred_path))
    print(format_report(report), end="")
    out_dir = config.get_str("out_dir", override=getattr(args, "out_dir", None))
    if out_dir:
        atomic_write_text(Path(out_dir) / "report.json", report.to_json())
        seed = config.get_int("seed", override=getattr(args, "seed", None), default=0)
        write_manifest(Path(out_dir), "score", config, seed)
    return EXIT_OK


def cmd_baseline(args) -> int:
    config = RunConfig.from_args(args)
    out_dir = _out_dir(config, args)
    seed = _seed(config, args)
    schema = _schema(config, args)
    kind = config.get_str("baseline_kind", override=args.kind, required=True)
    dev = _load_split(config, args, "dev_path", "dev", schema)
    test = _load_split(config, args, "test_path", "test", schema)
    provider = _provider(config, args) if kind == "cosine" else None
    all_pairs = config.get_bool("calibrate_all_pairs", override=args.all_pairs)

    calibration = calibrate(dev, kind, provider=provider, schema=schema, all_pairs=all_pairs)
    spec = BaselineSpec(
        kind=kind, threshold=calibration.threshold, provider=provider, schema=schema
    )
    adjacency_by_dialogue = baseline_predict(test, spec)
    threshold = config.get_float("threshold", override=args.threshold, default=0.5)
    merged: dict[str, set] = {}
    rows = []
    for dialogue in test.dialogues:
        mentions = test.gold.mentions(dialogue.id)
        clustering = cluster_links(
            adjacency_by_dialogue[dialogue.id], mentions, threshold=threshold
        )
        for (did, idx), label in sorted(clustering.assignments.items()):
            rows.append({"dialogue_id": did, "index": idx, "cluster": label})
        for label, members in clustering.clusters().items():
            merged[label] = members

    atomic_write_text(out_dir / "calibration.json", calibration.to_json())
    atomic_write_text(
        out_dir / "partition.jsonl",
        "".join(json.dumps(r, sort_keys=True) + "\n" for r in rows),
    )
    report = score(gold_partition(test.gold), merged)
    atomic_write_text(out_dir / "report.json", report.to_json())
    print(f"{kind} threshold {calibration.threshold:.4f} over {calibration.n_pairs} dev pairs")
    print(format_report(report), end="")
    write_manifest(out_dir, "baseline", config, seed)
    return EXIT_OK


def cmd_annotate(args) -> int:
    config = RunConfig.from_args(args)
    out_dir = _out_dir(config, args)
    seed = _seed(config, args)
    schema = _schema(config, args)
    corpus = _load_split(config, args, "corpus_path", "train", schema)
    mode = config.get_str("annotator_mode", override=args.annotator_mode, default="replay")
    context_limit = config.get_int(
        "annotator_context_limit", override=args.context_limit, default=25
    )
    if mode == "replay":
        replay_path = config.get_str("replay_path", override=args.replay_path, required=True)
        client = ReplayClient.from_transcript(replay_path)
    elif mode == "http":
        client = http_annotator(
            AnnotatorEndpointConfig(
                url=config.get_str("annotator_url", required=True),
                model=config.get_str("annotator_model", required=True),
                credential_env=config.get_str(
                    "annotator_credential_env", default="ANNOTATOR_API_KEY"
                ),
            )
        )
    else:
        raise ConfigError(f"unknown annotator mode {mode!r}")

    probing_lists = {
        dialogue.id: [
            u.index
            for u in dialogue.utterances
            if corpus.gold.label_of((dialogue.id, u.index)) is InterventionLabel.PROBING
        ]
        for dialogue in corpus.dialogues
    }
    goldmap = gold_cluster_mapping(
        list(corpus.dialogues), probing_lists, client, context_limit=context_limit
    )
    rows = goldmap_records(goldmap, probing_lists)
    atomic_write_text(
        out_dir / "goldmap.jsonl",
        "".join(json.dumps(r, sort_keys=True, ensure_ascii=False) + "\n" for r in rows),
    )
    atomic_write_text(out_dir / "transcript.jsonl", transcript_text(goldmap))
    if goldmap.flags:
        atomic_write_text(out_dir / "annotation-flags.txt", "\n".join(goldmap.flags) + "\n")
    print(f"labeled {len(goldmap.labels)} utterances into {len(goldmap.clusters())} chains")
    write_manifest(out_dir, "annotate", config, seed)
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    config = RunConfig.from_args(args)
    out_dir = _out_dir(config, args)
    seed = _seed(config, args)
    draws = config.get_int("draws", override=args.draws, default=50)
    step = config.get_float("fd_step", override=args.fd_step, default=1e-5)
    tolerance = config.get_float("gradcheck_tolerance", default=1e-4)
    feature_dim = config.get_int("gradcheck_dim", default=12)
    hidden = config.get_int("gradcheck_hidden", default=8)

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(draws):
        model = JointScorerModel.create(
            feature_dim=feature_dim,
            hidden=(hidden,),
            seed=int(rng.integers(2**31)),
        )
        n = int(rng.integers(2, 7))
        features = rng.normal(size=(n, 4 * feature_dim))
        labels = PairLabels(
            link=rng.integers(0, 2, size=n).astype(np.float64),
            probing=rng.integers(0, 2, size=n).astype(np.float64),
            causal=rng.integers(0, 2, size=n).astype(np.float64),
        )
        worst = max(worst, grad_check(model, features, labels, step=step))

    passed = worst < tolerance
    payload = {
        "draws": draws,
        "step": step,
        "max_relative_error": worst,
        "tolerance": tolerance,
        "pass": passed,
    }
    atomic_write_text(out_dir / "gradient-report.json", json.dumps(payload, indent=2) + "\n")
    print(f"gradcheck max relative error {worst:.3e} over {draws} draws "
          f"({'pass' if passed else 'FAIL'})")
    write_manifest(out_dir, "gradcheck", config, seed)
    if not passed:
        raise NumericError(f"gradient check failed: {worst:.3e} >= {tolerance:.0e}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="delibchain",
        description="Construct and evaluate chains linking probing utterances "
        "to their causal antecedents in collaborative dialogue.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat key=value configuration file")
        p.add_argument("--out-dir", dest="out_dir", help="artifact output directory")
        p.add_argument("--seed", type=int, help="run seed (required by every command)")
        p.add_argument("--schema", choices=("delidata", "wtd"), help="task entity schema")

    p = sub.add_parser("synth", help="synthesize train/dev/test corpora")
    common(p)
    p.add_argument("--n-train", type=int, dest="n_train")
    p.add_argument("--n-dev", type=int, dest="n_dev")
    p.add_argument("--n-test", type=int, dest="n_test")
    p.add_argument("--mean-dialogue-len", type=float, dest="mean_dialogue_len")
    p.add_argument("--mean-chain-len", type=float, dest="mean_chain_len")
    p.add_argument("--vocab-seed", type=int, dest="vocab_seed")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("pairs", help="dump labeled training pairs")
    common(p)
    p.add_argument("--train-path", dest="train_path")
    p.add_argument("--window", type=int)
    p.set_defaults(func=cmd_pairs)

    p = sub.add_parser("train", help="train the joint scorer")
    common(p)
    p.add_argument("--train-path", dest="train_path")
    p.add_argument("--window", type=int)
    p.add_argument("--context-k", type=int, dest="context_k")
    p.add_argument("--max-sequence-len", type=int, dest="max_sequence_len")
    p.add_argument("--embedding", choices=("hashed", "file"))
    p.add_argument("--embedding-dim", type=int, dest="embedding_dim")
    p.add_argument("--hidden", type=int)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--lr-link", type=float, dest="lr_link")
    p.add_argument("--lr-intervention", type=float, dest="lr_intervention")
    p.add_argument("--epochs", type=int)
    p.add_argument("--bidirectional", action="store_const", const=True, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="predict clusters and chains")
    common(p)
    p.add_argument("--test-path", dest="test_path")
    p.add_argument("--train-path", dest="train_path")
    p.add_argument("--checkpoint")
    p.add_argument("--window", type=int)
    p.add_argument("--context-k", type=int, dest="context_k")
    p.add_argument("--max-sequence-len", type=int, dest="max_sequence_len")
    p.add_argument("--embedding", choices=("hashed", "file"))
    p.add_argument("--embedding-dim", type=int, dest="embedding_dim")
    p.add_argument("--inference-mode", dest="inference_mode", choices=("windowed", "naive"))
    p.add_argument("--mentions", choices=("gold", "all"))
    p.add_argument("--threshold", type=float)
    p.add_argument("--chain-size", type=float, dest="chain_size")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("score", help="score predicted vs gold partitions")
    common(p)
    p.add_argument("--gold")
    p.add_argument("--pred")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("baseline", help="calibrate and run a similarity baseline")
    common(p)
    p.add_argument("--kind", choices=("lexical", "entity", "cosine"))
    p.add_argument("--dev-path", dest="dev_path")
    p.add_argument("--test-path", dest="test_path")
    p.add_argument("--embedding", choices=("hashed", "file"))
    p.add_argument("--embedding-dim", type=int, dest="embedding_dim")
    p.add_argument("--threshold", type=float)
    p.add_argument("--all-pairs", dest="all_pairs", action="store_const", const=True, default=None)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("annotate", help="build a gold map with an annotator client")
    common(p)
    p.add_argument("--corpus-path", dest="corpus_path")
    p.add_argument("--annotator-mode", dest="annotator_mode", choices=("replay", "http"))
    p.add_argument("--replay-path", dest="replay_path")
    p.add_argument("--context-limit", type=int, dest="context_limit")
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("gradcheck", help="verify gradients against finite differences")
    common(p)
    p.add_argument("--draws", type=int)
    p.add_argument("--fd-step", type=float, dest="fd_step")
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ExternalServiceError as exc:
        print(f"external service failure: {exc}", file=sys.stderr)
        return EXIT_EXTERNAL
    except DataValidationError as exc:
        print(f"data validation error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DelibchainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

"""Dialogue corpora with per-utterance intervention labels and gold chains.

A corpus file is line-delimited: a single header record followed by one
record per utterance. Utterance records carry the fields
``dialogue_id, index, speaker, text, label, cluster_id`` where ``label``
is ``P`` (probing), ``C`` (causal) or ``N`` (neither) and ``cluster_id``
is empty exactly when the label is ``N``. Gold chains are implied by
shared ``cluster_id`` values. JSON lines are canonical; tab-separated
rows with the same column order are accepted on input for hand-written
fixtures (no escaping, so text must not contain tabs or newlines).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataValidationError, ParseError

# (dialogue_id, utterance index) — the universal mention key.
MentionRef = tuple[str, int]

FORMAT_VERSION = 1
SCHEMAS = ("delidata", "wtd")
SPLITS = ("train", "dev", "test")


class InterventionLabel(str, Enum):
    PROBING = "P"
    CAUSAL = "C"
    NEITHER = "N"

    @classmethod
    def parse(cls, code: str) -> "InterventionLabel":
        try:
            return cls(code)
        except ValueError:
            raise DataValidationError(f"unknown intervention label {code!r}") from None


@dataclass(frozen=True)
class Utterance:
    id: str
    speaker: str
    text: str
    index: int


@dataclass(frozen=True)
class Dialogue:
    id: str
    utterances: tuple[Utterance, ...]
    task_schema: str = "delidata"

    def __len__(self) -> int:
        return len(self.utterances)


@dataclass
class GoldClustering:
    """Cluster membership and role labels for every annotated utterance.

    ``assignments`` maps intervention utterances to their chain label;
    ``labels`` maps every known utterance to its role (including N).
    """

    assignments: dict[MentionRef, str] = field(default_factory=dict)
    labels: dict[MentionRef, InterventionLabel] = field(default_factory=dict)

    def clusters(self) -> dict[str, list[MentionRef]]:
        out: dict[str, list[MentionRef]] = {}
        for ref, label in self.assignments.items():
            out.setdefault(label, []).append(ref)
        for members in out.values():
            members.sort()
        return out

    def label_of(self, ref: MentionRef) -> InterventionLabel:
        return self.labels.get(ref, InterventionLabel.NEITHER)

    def mentions(self, dialogue_id: str) -> list[int]:
        """Indices of intervention (P or C) utterances in one dialogue, sorted."""
        return sorted(
            idx
            for (did, idx), label in self.labels.items()
            if did == dialogue_id and label is not InterventionLabel.NEITHER
        )


@dataclass
class Corpus:
    dialogues: tuple[Dialogue, ...]
    gold: GoldClustering
    split_name: str = "train"

    @property
    def schema(self) -> str:
        return self.dialogues[0].task_schema if self.dialogues else "delidata"

    def dialogue(self, dialogue_id: str) -> Dialogue:
        for d in self.dialogues:
            if d.id == dialogue_id:
                return d
        raise KeyError(dialogue_id)


def validate_corpus(corpus: Corpus) -> None:
    """Raise DataValidationError on any structural invariant violation."""
    if corpus.split_name not in SPLITS:
        raise DataValidationError(f"unknown split name {corpus.split_name!r}")
    seen_dialogues = set()
    known_refs = set()
    for dialogue in corpus.dialogues:
        if dialogue.id in seen_dialogues:
            raise DataValidationError(f"duplicate dialogue id {dialogue.id!r}")
        seen_dialogues.add(dialogue.id)
        if dialogue.task_schema not in SCHEMAS:
            raise DataValidationError(
                f"dialogue {dialogue.id!r}: unknown task schema {dialogue.task_schema!r}"
            )
        ids = set()
        for pos, utt in enumerate(dialogue.utterances):
            if utt.index != pos:
                raise DataValidationError(
                    f"dialogue {dialogue.id!r}: utterance at position {pos} "
                    f"has index {utt.index} (indices must be 0..N-1 with no gaps)"
                )
            if not utt.text.strip():
                raise DataValidationError(
                    f"dialogue {dialogue.id!r}: utterance {utt.index} has empty text"
                )
            if utt.id in ids:
                raise DataValidationError(
                    f"dialogue {dialogue.id!r}: duplicate utterance id {utt.id!r}"
                )
            ids.add(utt.id)
            known_refs.add((dialogue.id, utt.index))

    for ref in corpus.gold.labels:
        if ref not in known_refs:
            raise DataValidationError(f"gold label references unknown utterance {ref}")
    for ref, cluster in corpus.gold.assignments.items():
        if ref not in known_refs:
            raise DataValidationError(
                f"cluster {cluster!r} references unknown utterance {ref}"
            )
        if corpus.gold.label_of(ref) is InterventionLabel.NEITHER:
            raise DataValidationError(
                f"cluster {cluster!r} contains utterance {ref} labeled N"
            )
    for ref, label in corpus.gold.labels.items():
        in_cluster = ref in corpus.gold.assignments
        if label is InterventionLabel.NEITHER and in_cluster:
            raise DataValidationError(f"utterance {ref} labeled N but clustered")
        if label is not InterventionLabel.NEITHER and not in_cluster:
            raise DataValidationError(
                f"utterance {ref} labeled {label.value} but missing a cluster id"
            )

    for cluster, members in corpus.gold.clusters().items():
        if len(members) < 2:
            raise DataValidationError(
                f"cluster {cluster!r} has {len(members)} member(s); singletons invalid"
            )
        if len({did for did, _ in members}) > 1:
            raise DataValidationError(f"cluster {cluster!r} spans multiple dialogues")


# ---------------------------------------------------------------------------
# Reading and writing
# ---------------------------------------------------------------------------

_COLUMNS = ("dialogue_id", "index", "speaker", "text", "label", "cluster_id")


def _utterance_record(dialogue_id: str, utt: Utterance, gold: GoldClustering) -> dict:
    ref = (dialogue_id, utt.index)
    return {
        "record": "utterance",
        "dialogue_id": dialogue_id,
        "index": utt.index,
        "speaker": utt.speaker,
        "text": utt.text,
        "label": gold.label_of(ref).value,
        "cluster_id": gold.assignments.get(ref, ""),
    }


def write_corpus(corpus: Corpus, path: str | Path) -> None:
    """Serialize a corpus as canonical JSON lines (header first)."""
    validate_corpus(corpus)
    lines = [
        json.dumps(
            {
                "record": "header",
                "version": FORMAT_VERSION,
                "schema": corpus.schema,
                "split": corpus.split_name,
            },
            sort_keys=True,
            ensure_ascii=False,
        )
    ]
    for dialogue in corpus.dialogues:
        for utt in dialogue.utterances:
            rec = _utterance_record(dialogue.id, utt, corpus.gold)
            lines.append(json.dumps(rec, sort_keys=True, ensure_ascii=False))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_json_line(raw: str, path: str, lineno: int) -> dict:
    try:
        rec = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON ({exc.msg})", path, lineno) from None
    if not isinstance(rec, dict):
        raise ParseError("record is not a JSON object", path, lineno)
    return rec


def _parse_tsv_line(raw: str, path: str, lineno: int) -> dict:
    cells = raw.split("\t")
    if len(cells) != len(_COLUMNS):
        raise ParseError(
            f"expected {len(_COLUMNS)} tab-separated fields, got {len(cells)}",
            path,
            lineno,
        )
    rec = dict(zip(_COLUMNS, cells))
    rec["record"] = "utterance"
    return rec


def load_corpus(
    path: str | Path,
    format: str = "delidata-like",
    split_name: str | None = None,
) -> Corpus:
    """Load and validate a corpus file.

    ``format`` selects the task schema attached to dialogues
    (``delidata-like`` or ``wtd-like``); a JSONL header record, when
    present, takes precedence. Raises ParseError with the offending line
    number on malformed records and DataValidationError when the loaded
    data violates gold-clustering invariants; no partially-built corpus
    escapes either way.
    """
    if format not in ("delidata-like", "wtd-like"):
        raise ConfigError(f"unknown corpus format {format!r}")
    schema = "delidata" if format == "delidata-like" else "wtd"
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"corpus file not found: {path}")
    split = split_name or "train"

    order: list[str] = []
    per_dialogue: dict[str, list[dict]] = {}
    with path.open(encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            raw = raw.rstrip("\n")
            if not raw.strip():
                continue
            if raw.lstrip().startswith("{"):
                rec = _parse_json_line(raw, str(path), lineno)
            else:
                rec = _parse_tsv_line(raw, str(path), lineno)
            kind = rec.get("record", "utterance")
            if kind == "header":
                schema = rec.get("schema", schema)
                if split_name is None:
                    split = rec.get("split", split)
                continue
            if kind != "utterance":
                raise ParseError(f"unknown record kind {kind!r}", str(path), lineno)
            missing = [c for c in _COLUMNS if c not in rec]
            if missing:
                raise ParseError(f"missing fields: {', '.join(missing)}", str(path), lineno)
            try:
                rec["index"] = int(rec["index"])
            except (TypeError, ValueError):
                raise ParseError(
                    f"index must be an integer, got {rec['index']!r}", str(path), lineno
                ) from None
            rec["label"] = str(rec["label"]).strip()
            if rec["label"] not in ("P", "C", "N"):
                raise ParseError(f"label must be P, C or N, got {rec['label']!r}", str(path), lineno)
            did = str(rec["dialogue_id"])
            if did not in per_dialogue:
                per_dialogue[did] = []
                order.append(did)
            per_dialogue[did].append(rec)

    dialogues = []
    gold = GoldClustering()
    for did in order:
        records = sorted(per_dialogue[did], key=lambda r: r["index"])
        utterances = tuple(
            Utterance(
                id=f"u{rec['index']}",
                speaker=str(rec["speaker"]),
                text=str(rec["text"]),
                index=rec["index"],
            )
            for rec in records
        )
        dialogues.append(Dialogue(id=did, utterances=utterances, task_schema=schema))
        for rec in records:
            ref = (did, rec["index"])
            gold.labels[ref] = InterventionLabel.parse(rec["label"])
            cluster = str(rec.get("cluster_id") or "").strip()
            if cluster:
                gold.assignments[ref] = cluster

    corpus = Corpus(dialogues=tuple(dialogues), gold=gold, split_name=split)
    validate_corpus(corpus)
    return corpus


# ---------------------------------------------------------------------------
# Synthetic corpora
# ---------------------------------------------------------------------------

_SPEAKER_POOL = ("ana", "bo", "chen", "dara", "eli", "filip", "gia", "hana")

# Interrogative lead-ins give probing utterances a learnable surface cue.
_PROBING_OPENERS = ("why", "how", "so", "should we", "are we sure", "what about")
_CAUSAL_OPENERS = ("i think", "maybe", "we could", "look", "because", "note that")

_WTD_COLORS = ("red", "blue", "green", "purple", "yellow")
_WTD_WEIGHTS = tuple(str(w) for w in range(10, 110, 10))
_DELI_LETTERS = tuple("aeoubcdfgkmpqrstvwz")
_DELI_DIGITS = tuple(str(d) for d in range(10))


@dataclass(frozen=True)
class SynthConfig:
    n_dialogues: int = 100
    mean_dialogue_len: float = 33.0
    mean_chain_len: float = 5.0
    vocab_seed: int = 0
    schema: str = "delidata"
    split_name: str = "train"


def _make_vocabulary(vocab_seed: int, size: int = 160) -> list[str]:
    rng = np.random.default_rng(vocab_seed)
    onsets = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"]
    nuclei = ["a", "e", "o", "u", "ai", "ei", "ou"]
    codas = ["", "n", "r", "s", "l", "m", "k"]
    words = set()
    while len(words) < size:
        parts = []
        for _ in range(int(rng.integers(2, 4))):
            parts.append(onsets[rng.integers(len(onsets))])
            parts.append(nuclei[rng.integers(len(nuclei))])
        parts.append(codas[rng.integers(len(codas))])
        words.add("".join(parts))
    return sorted(words)


def _chain_signature(rng: np.random.Generator, schema: str, topics: list[str]) -> list[str]:
    """Three content tokens shared by every member of a planted chain."""
    topic = topics[rng.integers(len(topics))]
    if schema == "wtd":
        color = _WTD_COLORS[rng.integers(len(_WTD_COLORS))]
        weight = _WTD_WEIGHTS[rng.integers(len(_WTD_WEIGHTS))]
        return [color, weight, topic]
    letter = _DELI_LETTERS[rng.integers(len(_DELI_LETTERS))]
    digit = _DELI_DIGITS[rng.integers(len(_DELI_DIGITS))]
    return [letter, digit, topic]


def _fillers(rng: np.random.Generator, vocab: list[str], low: int, high: int) -> list[str]:
    n = int(rng.integers(low, high + 1))
    return [vocab[rng.integers(len(vocab))] for _ in range(n)]


def synthesize_corpus(config: SynthConfig, seed: int) -> Corpus:
    """Generate a corpus with planted deliberation chains.

    Members of one chain share a three-token signature so a pairwise
    scorer has a recoverable signal; non-member utterances occasionally
    borrow a single signature token as a lexical-overlap distractor.
    Deterministic for a fixed (config, seed).
    """
    if config.mean_chain_len < 2:
        raise ConfigError("mean_chain_len must be >= 2")
    if config.schema not in SCHEMAS:
        raise ConfigError(f"unknown schema {config.schema!r}")
    if config.mean_chain_len >= config.mean_dialogue_len:
        raise ConfigError(
            "infeasible config: mean_chain_len "
            f"{config.mean_chain_len} >= mean_dialogue_len {config.mean_dialogue_len}"
        )
    if config.n_dialogues < 1:
        raise ConfigError("n_dialogues must be >= 1")

    rng = np.random.default_rng(seed)
    vocab = _make_vocabulary(config.vocab_seed)
    topic_pool = _make_vocabulary(config.vocab_seed + 1, size=80)

    dialogues = []
    gold = GoldClustering()
    for d in range(config.n_dialogues):
        did = f"{config.split_name}-{d:04d}"
        length = max(6, int(rng.poisson(config.mean_dialogue_len)))
        speakers = [
            str(s)
            for s in rng.choice(_SPEAKER_POOL, size=int(rng.integers(3, 6)), replace=False)
        ]

        target = max(1, int(round(0.32 * length / config.mean_chain_len)))
        sizes: list[int] = []
        budget = max(2, int(0.6 * length))
        for _ in range(target):
            size = 2 + int(rng.poisson(max(0.0, config.mean_chain_len - 2)))
            size = min(size, budget - sum(sizes))
            if size < 2:
                break
            sizes.append(size)
        if not sizes:
            sizes = [2]

        # Chains occupy compact, possibly overlapping zones: deliberation
        # stays near one attentional state rather than spanning the whole
        # dialogue, and overlapping zones create interleaved distractors.
        used: set[int] = set()

        def claim(desired: int) -> int:
            pos = min(desired, length - 1)
            while pos in used:
                pos += 1
                if pos >= length:
                    pos = 0
            used.add(pos)
            return pos

        chain_slots: list[list[int]] = []
        for size in sizes:
            gaps = [1 + int(rng.poisson(1.2)) for _ in range(size - 1)]
            span = sum(gaps)
            start = int(rng.integers(0, max(1, length - span)))
            slots = []
            cursor = start
            slots.append(claim(cursor))
            for gap in gaps:
                cursor += gap
                slots.append(claim(cursor))
            chain_slots.append(slots)

        texts: dict[int, str] = {}
        signatures = []
        for c, slots in enumerate(chain_slots):
            slots.sort()
            signature = _chain_signature(rng, config.schema, topic_pool)
            signatures.append(signature)
            cluster = f"{did}.c{c}"
            for rank, pos in enumerate(slots):
                if rank == 0:
                    role = InterventionLabel.CAUSAL
                elif rank == len(slots) - 1:
                    role = InterventionLabel.PROBING
                else:
                    role = (
                        InterventionLabel.CAUSAL
                        if rng.random() < 0.7
                        else InterventionLabel.PROBING
                    )
                gold.labels[(did, pos)] = role
                gold.assignments[(did, pos)] = cluster
                sig = list(signature)
                rng.shuffle(sig)
                words = _fillers(rng, vocab, 2, 5)
                insert_at = int(rng.integers(0, len(words) + 1))
                words[insert_at:insert_at] = sig
                if role is InterventionLabel.PROBING:
                    opener = _PROBING_OPENERS[rng.integers(len(_PROBING_OPENERS))]
                    texts[pos] = f"{opener} {' '.join(words)}?"
                else:
                    opener = _CAUSAL_OPENERS[rng.integers(len(_CAUSAL_OPENERS))]
                    texts[pos] = f"{opener} {' '.join(words)}."

        utterances = []
        for pos in range(length):
            if pos in texts:
                text = texts[pos]
            else:
                words = _fillers(rng, vocab, 3, 8)
                if signatures and rng.random() < 0.25:
                    sig = signatures[rng.integers(len(signatures))]
                    words.insert(int(rng.integers(0, len(words) + 1)), sig[int(rng.integers(3))])
                gold.labels[(did, pos)] = InterventionLabel.NEITHER
                text = " ".join(words) + "."
            utterances.append(
                Utterance(
                    id=f"u{pos}",
                    speaker=speakers[int(rng.integers(len(speakers)))],
                    text=text,
                    index=pos,
                )
            )
        dialogues.append(
            Dialogue(id=did, utterances=tuple(utterances), task_schema=config.schema)
        )

    corpus = Corpus(dialogues=tuple(dialogues), gold=gold, split_name=config.split_name)
    validate_corpus(corpus)
    return corpus


# ---------------------------------------------------------------------------
# Descriptive statistics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CorpusStats:
    n_dialogues: int
    n_probing: int
    n_causal: int
    n_clusters: int
    mean_dialogue_len: float
    mean_chain_len: float
    min_chain_len: int
    max_chain_len: int


def corpus_statistics(corpus: Corpus) -> CorpusStats:
    sizes = [len(m) for m in corpus.gold.clusters().values()]
    labels = list(corpus.gold.labels.values())
    lengths = [len(d) for d in corpus.dialogues]
    return CorpusStats(
        n_dialogues=len(corpus.dialogues),
        n_probing=sum(1 for l in labels if l is InterventionLabel.PROBING),
        n_causal=sum(1 for l in labels if l is InterventionLabel.CAUSAL),
        n_clusters=len(sizes),
        mean_dialogue_len=float(np.mean(lengths)) if lengths else math.nan,
        mean_chain_len=float(np.mean(sizes)) if sizes else math.nan,
        min_chain_len=min(sizes) if sizes else 0,
        max_chain_len=max(sizes) if sizes else 0,
    )


def chain_size_stat(corpus: Corpus, mode: str) -> float:
    """Characteristic chain size used for pair pruning (mean or max)."""
    stats = corpus_statistics(corpus)
    if stats.n_clusters == 0:
        raise DataValidationError("corpus has no gold clusters")
    if mode == "mean":
        return stats.mean_chain_len
    if mode == "max":
        return float(stats.max_chain_len)
    raise ConfigError(f"unknown chain size statistic {mode!r}")


def split_corpus(corpus: Corpus, name: str) -> Corpus:
    """Return a copy of the corpus relabeled as a different split."""
    return replace(corpus, split_name=name)


def restrict_gold(gold: GoldClustering, dialogue_id: str) -> GoldClustering:
    """Gold clustering restricted to one dialogue."""
    return GoldClustering(
        assignments={r: c for r, c in gold.assignments.items() if r[0] == dialogue_id},
        labels={r: l for r, l in gold.labels.items() if r[0] == dialogue_id},
    )


def gold_partition(gold: GoldClustering) -> dict[str, set[MentionRef]]:
    """Gold clusters as a label → member-set mapping for the metric layer."""
    return {label: set(members) for label, members in gold.clusters().items()}

"""Utterance pairing: labeled training pairs and marked-context rendering.

Pairs always run antecedent → consequent (i < j). A pair's textual form
concatenates the consequent's preceding context, prefixes every
utterance with its speaker, and wraps the two paired utterances in
``<m>`` / ``</m>`` markers. Tokenization is deliberately simple
(lowercase, word runs and single punctuation marks) so the sequence
budget has exact, testable semantics.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .corpus import Corpus, Dialogue, GoldClustering, InterventionLabel
from .errors import ConfigError, DataValidationError

DEFAULT_CONTEXT_K = 10
DEFAULT_MAX_SEQUENCE_LEN = 512

# Windows tuned per corpus family; exposed through run configuration.
DEFAULT_WINDOWS = {"delidata": 18, "wtd": 9}

_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)

OPEN_MARKER = "<m>"
CLOSE_MARKER = "</m>"


def tokenize(text: str) -> list[str]:
    """Lowercased word runs plus single punctuation characters."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class LabeledPair:
    dialogue_id: str
    i: int
    j: int
    link: int
    role_i: InterventionLabel
    role_j: InterventionLabel

    def __post_init__(self):
        if self.i >= self.j:
            raise DataValidationError(f"pair ({self.i}, {self.j}) is not antecedent-ordered")


@dataclass(frozen=True)
class PairText:
    """Rendered pair context with the two paired utterances marked.

    ``tokens`` holds the content tokens that count against the sequence
    budget; ``span_i``/``span_j`` are half-open token ranges covering the
    antecedent's and consequent's text tokens. ``rendered`` is the
    display string with markers inserted.
    """

    rendered: str
    tokens: tuple[str, ...]
    span_i: tuple[int, int]
    span_j: tuple[int, int]
    i: int
    j: int

    @property
    def span_i_text(self) -> str:
        return " ".join(self.tokens[self.span_i[0] : self.span_i[1]])

    @property
    def span_j_text(self) -> str:
        return " ".join(self.tokens[self.span_j[0] : self.span_j[1]])

    @property
    def context_text(self) -> str:
        return " ".join(self.tokens)


def generate_training_pairs(
    dialogue: Dialogue,
    gold: GoldClustering,
    window: int,
) -> list[LabeledPair]:
    """Every ordered pair (u_i, u_j) with j - window <= i < j.

    A pair is positive exactly when both members share a gold cluster;
    utterances labeled N participate as negatives, so the pairing covers
    the whole dialogue rather than just annotated interventions.
    """
    if window < 1:
        raise ConfigError("window must be >= 1")
    pairs = []
    did = dialogue.id
    for j in range(1, len(dialogue)):
        for i in range(max(0, j - window), j):
            cluster_i = gold.assignments.get((did, i))
            cluster_j = gold.assignments.get((did, j))
            link = int(cluster_i is not None and cluster_i == cluster_j)
            pairs.append(
                LabeledPair(
                    dialogue_id=did,
                    i=i,
                    j=j,
                    link=link,
                    role_i=gold.label_of((did, i)),
                    role_j=gold.label_of((did, j)),
                )
            )
    return pairs


def assemble_pair_text(
    dialogue: Dialogue,
    i: int,
    j: int,
    k: int = DEFAULT_CONTEXT_K,
    max_sequence_len: int = DEFAULT_MAX_SEQUENCE_LEN,
) -> PairText:
    """Render the pair (i, j) with the k utterances preceding j as context.

    When the budget overflows, context tokens are dropped oldest-first;
    the two marked utterances (and their speaker prefixes) are never
    truncated. If the marked material alone exceeds the budget the pair
    cannot be rendered and a DataValidationError is raised.
    """
    n = len(dialogue)
    if not (0 <= i < j < n):
        raise DataValidationError(f"invalid pair indices ({i}, {j}) for dialogue of {n}")
    if k < 0:
        raise ConfigError("context depth k must be >= 0")
    if max_sequence_len < 1:
        raise ConfigError("max_sequence_len must be >= 1")

    included = sorted({i, j} | set(range(max(0, j - k), j)))
    units = []
    for idx in included:
        utt = dialogue.utterances[idx]
        prefix = tokenize(f"{utt.speaker}:")
        text = tokenize(utt.text)
        units.append({"index": idx, "prefix": prefix, "text": text, "marked": idx in (i, j)})

    protected = sum(len(u["prefix"]) + len(u["text"]) for u in units if u["marked"])
    if protected > max_sequence_len:
        raise DataValidationError(
            f"marked utterances need {protected} tokens, over the {max_sequence_len} budget"
        )

    total = sum(len(u["prefix"]) + len(u["text"]) for u in units)
    excess = total - max_sequence_len
    for unit in units:  # oldest first; drop a unit's prefix before its text
        if excess <= 0:
            break
        if unit["marked"]:
            continue
        for key in ("prefix", "text"):
            if excess <= 0:
                break
            drop = min(excess, len(unit[key]))
            unit[key] = unit[key][drop:]
            excess -= drop

    tokens: list[str] = []
    pieces: list[str] = []
    spans: dict[int, tuple[int, int]] = {}
    for unit in units:
        unit_tokens = unit["prefix"] + unit["text"]
        if not unit_tokens and not unit["marked"]:
            continue
        pieces.extend(unit["prefix"])
        tokens.extend(unit["prefix"])
        start = len(tokens)
        if unit["marked"]:
            pieces.append(OPEN_MARKER)
        pieces.extend(unit["text"])
        tokens.extend(unit["text"])
        if unit["marked"]:
            pieces.append(CLOSE_MARKER)
            spans[unit["index"]] = (start, len(tokens))

    return PairText(
        rendered=" ".join(pieces),
        tokens=tuple(tokens),
        span_i=spans[i],
        span_j=spans[j],
        i=i,
        j=j,
    )


@dataclass(frozen=True)
class PairStats:
    """Counts plus the positive fraction (positives over all pairs)."""

    positives: int
    negatives: int
    ratio: float


def pair_statistics(pairs: list[LabeledPair]) -> PairStats:
    positives = sum(p.link for p in pairs)
    negatives = len(pairs) - positives
    ratio = positives / len(pairs) if pairs else 0.0
    return PairStats(positives=positives, negatives=negatives, ratio=ratio)


def corpus_training_pairs(corpus: Corpus, window: int) -> list[LabeledPair]:
    """Pairs pooled across all dialogues (shuffling happens at train time)."""
    pairs: list[LabeledPair] = []
    for dialogue in corpus.dialogues:
        pairs.extend(generate_training_pairs(dialogue, corpus.gold, window))
    return pairs


def sweep_window(corpus: Corpus, windows: list[int]) -> dict[int, PairStats]:
    """Positive/negative balance per candidate window, for dev tuning."""
    return {w: pair_statistics(corpus_training_pairs(corpus, w)) for w in windows}


def pick_window(
    corpus: Corpus,
    windows: list[int],
    lo: float = 0.1,
    hi: float = 1.0,
) -> int:
    """Smallest window whose positive:negative ratio lands in [lo, hi].

    Falls back to the window with the ratio closest to the band when
    none lands inside it.
    """
    if not windows:
        raise ConfigError("no candidate windows given")
    stats = sweep_window(corpus, sorted(windows))
    inside = [w for w, s in stats.items() if lo <= s.ratio <= hi]
    if inside:
        return min(inside)

    def distance(w: int) -> float:
        r = stats[w].ratio
        if r < lo:
            return lo - r
        return r - hi

    return min(stats, key=lambda w: (distance(w), w))

"""From pair scores to predicted intervention clusters and chains.

Candidate pairs over a dialogue's mention set are scored by the joint
model into a per-dialogue adjacency of link probabilities. The naive
(unwindowed) mode first prunes candidates to the top G×C pairs ranked
by the mean of the two intervention scores. Links at or above the
threshold (default 0.5) are closed transitively via connected
components; mentions left without a surviving link stay in the scored
partition as singletons but are not exported as chains.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import Corpus, Dialogue, GoldClustering, InterventionLabel, MentionRef
from .errors import ConfigError, DataValidationError
from .features import EmbeddingProvider, pair_feature
from .graph import DeliberationChain, chains_from_clusters
from .pairs import DEFAULT_CONTEXT_K, DEFAULT_MAX_SEQUENCE_LEN, assemble_pair_text
from .scorer import JointScorerModel, forward

DEFAULT_THRESHOLD = 0.5


@dataclass(frozen=True)
class PairScore:
    i: int
    j: int
    link: float
    probing: float | None = None
    causal: float | None = None

    def intervention_mean(self) -> float:
        if self.probing is None or self.causal is None:
            raise DataValidationError(f"pair ({self.i}, {self.j}) has no intervention scores")
        return 0.5 * (self.probing + self.causal)


@dataclass
class AdjacencyMatrix:
    """Sparse antecedent-ordered link scores for one dialogue."""

    dialogue_id: str
    scores: dict[tuple[int, int], PairScore] = field(default_factory=dict)

    def add(self, score: PairScore) -> None:
        if score.i >= score.j:
            raise DataValidationError(f"entry ({score.i}, {score.j}) is not antecedent-ordered")
        if not (0.0 <= score.link <= 1.0):
            raise DataValidationError(f"link probability {score.link} outside [0, 1]")
        self.scores[(score.i, score.j)] = score

    def link(self, i: int, j: int) -> float:
        return self.scores[(i, j)].link

    def __len__(self) -> int:
        return len(self.scores)


@dataclass
class PredictedClustering:
    """Predicted partition of the considered mentions.

    ``labels`` carries each mention's intervention role when known (the
    default gold-mention inference mode knows them), which downstream
    chain construction uses for roots/terminals.
    """

    assignments: dict[MentionRef, str] = field(default_factory=dict)
    labels: dict[MentionRef, InterventionLabel] = field(default_factory=dict)

    def clusters(self) -> dict[str, set[MentionRef]]:
        out: dict[str, set[MentionRef]] = {}
        for ref, label in self.assignments.items():
            out.setdefault(label, set()).add(ref)
        return out

    def partition(self) -> dict[str, set[MentionRef]]:
        return self.clusters()


def gold_mentions(dialogue: Dialogue, gold: GoldClustering) -> list[int]:
    """Indices of gold intervention utterances, the default mention set."""
    return gold.mentions(dialogue.id)


def all_mentions(dialogue: Dialogue) -> list[int]:
    return list(range(len(dialogue)))


def candidate_pairs(
    dialogue: Dialogue,
    mentions: list[int],
    mode: str = "windowed",
    window: int | None = None,
) -> list[tuple[int, int]]:
    """Antecedent-ordered mention pairs, optionally within a window.

    ``windowed`` keeps pairs whose utterance-index distance is at most
    ``window``; ``naive`` relaxes the window and emits every pair.
    """
    known = {u.index for u in dialogue.utterances}
    outside = [m for m in mentions if m not in known]
    if outside:
        raise DataValidationError(f"mentions {outside} not in dialogue {dialogue.id!r}")
    ordered = sorted(set(mentions))
    if mode == "windowed":
        if window is None or window < 1:
            raise ConfigError("windowed mode needs a window >= 1")
        return [
            (i, j)
            for a, i in enumerate(ordered)
            for j in ordered[a + 1 :]
            if j - i <= window
        ]
    if mode == "naive":
        return [(i, j) for a, i in enumerate(ordered) for j in ordered[a + 1 :]]
    raise ConfigError(f"unknown candidate mode {mode!r}")


def score_pairs(
    model: JointScorerModel,
    dialogue: Dialogue,
    pairs: list[tuple[int, int]],
    provider: EmbeddingProvider,
    k: int = DEFAULT_CONTEXT_K,
    max_sequence_len: int = DEFAULT_MAX_SEQUENCE_LEN,
) -> AdjacencyMatrix:
    """Run the scorer over candidate pairs; deterministic per input."""
    adjacency = AdjacencyMatrix(dialogue_id=dialogue.id)
    if not pairs:
        return adjacency
    feats = np.stack(
        [
            pair_feature(
                assemble_pair_text(dialogue, i, j, k=k, max_sequence_len=max_sequence_len),
                provider,
            ).concatenated
            for i, j in pairs
        ]
    )
    outputs = forward(model, feats)
    for idx, (i, j) in enumerate(pairs):
        adjacency.add(
            PairScore(
                i=i,
                j=j,
                link=float(outputs.link[idx]),
                probing=float(outputs.probing[idx]),
                causal=float(outputs.causal[idx]),
            )
        )
    return adjacency


def prune_naive(
    scores: list[PairScore],
    intervention_count: int,
    chain_size: float,
) -> list[PairScore]:
    """Keep the top G×C pairs by mean intervention score.

    G is the number of interventions under consideration and C the
    characteristic chain size of the corpus family (mean chain size for
    delidata-like data, max for wtd-like). Ties at the cutoff break
    deterministically toward the earlier (lower j, then lower i) pair.
    """
    tau = int(math.floor(intervention_count * chain_size))
    if tau <= 0:
        raise ConfigError(
            f"pruning budget G*C = {intervention_count}*{chain_size} is not positive"
        )
    ranked = sorted(scores, key=lambda s: (-s.intervention_mean(), s.j, s.i))
    return ranked[:tau]


def cluster_links(
    adjacency: AdjacencyMatrix,
    mentions: list[int],
    threshold: float = DEFAULT_THRESHOLD,
    labels: dict[MentionRef, InterventionLabel] | None = None,
) -> PredictedClustering:
    """Connected components over links scoring at or above the threshold.

    Every considered mention lands in exactly one cluster; mentions with
    no surviving link become singleton clusters. Cluster labels are
    derived from each component's earliest member, so the result is
    invariant to the order pairs were scored in.
    """
    if not (0.0 < threshold < 1.0):
        raise ConfigError(f"threshold {threshold} outside (0, 1)")
    parent = {m: m for m in mentions}

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a: int, b: int) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    for (i, j), score in adjacency.scores.items():
        if i in parent and j in parent and score.link >= threshold:
            union(i, j)

    components: dict[int, list[int]] = {}
    for m in mentions:
        components.setdefault(find(m), []).append(m)

    did = adjacency.dialogue_id
    clustering = PredictedClustering()
    for rank, root in enumerate(sorted(components)):
        label = f"{did}.p{rank}"
        for m in sorted(components[root]):
            ref = (did, m)
            clustering.assignments[ref] = label
            if labels and ref in labels:
                clustering.labels[ref] = labels[ref]
    return clustering


@dataclass(frozen=True)
class InferenceConfig:
    mode: str = "windowed"  # windowed | naive
    window: int | None = 18
    threshold: float = DEFAULT_THRESHOLD
    k: int = DEFAULT_CONTEXT_K
    max_sequence_len: int = DEFAULT_MAX_SEQUENCE_LEN
    mentions: str = "gold"  # gold | all
    chain_size: float | None = None  # required for naive pruning


@dataclass
class DialoguePrediction:
    dialogue_id: str
    clustering: PredictedClustering
    chains: list[DeliberationChain]
    adjacency: AdjacencyMatrix
    pruned: list[PairScore] | None = None


def predict_chains(
    dialogue: Dialogue,
    model: JointScorerModel,
    provider: EmbeddingProvider,
    config: InferenceConfig,
    gold: GoldClustering | None = None,
) -> DialoguePrediction:
    """Score, (optionally) prune, threshold, close, and order one dialogue."""
    if config.mentions == "gold":
        if gold is None:
            raise ConfigError("gold-mention inference needs a gold clustering")
        mentions = gold_mentions(dialogue, gold)
    elif config.mentions == "all":
        mentions = all_mentions(dialogue)
    else:
        raise ConfigError(f"unknown mention mode {config.mentions!r}")

    pairs = candidate_pairs(dialogue, mentions, mode=config.mode, window=config.window)
    adjacency = score_pairs(
        model, dialogue, pairs, provider, k=config.k, max_sequence_len=config.max_sequence_len
    )

    pruned = None
    if config.mode == "naive":
        if config.chain_size is None:
            raise ConfigError("naive inference needs a chain_size statistic for pruning")
        pruned = prune_naive(list(adjacency.scores.values()), len(mentions), config.chain_size)
        surviving = AdjacencyMatrix(dialogue_id=dialogue.id)
        for score in pruned:
            surviving.add(score)
        adjacency_for_clustering = surviving
    else:
        adjacency_for_clustering = adjacency

    mention_labels = (
        {(dialogue.id, m): gold.label_of((dialogue.id, m)) for m in mentions} if gold else None
    )
    clustering = cluster_links(
        adjacency_for_clustering, mentions, threshold=config.threshold, labels=mention_labels
    )
    sizes: dict[str, int] = {}
    for label in clustering.assignments.values():
        sizes[label] = sizes.get(label, 0) + 1
    multi = PredictedClustering(
        assignments={
            ref: label for ref, label in clustering.assignments.items() if sizes[label] >= 2
        },
        labels=clustering.labels,
    )
    chains = chains_from_clusters(multi, dialogue)
    return DialoguePrediction(
        dialogue_id=dialogue.id,
        clustering=clustering,
        chains=chains,
        adjacency=adjacency,
        pruned=pruned,
    )


def predict_corpus(
    corpus: Corpus,
    model: JointScorerModel,
    provider: EmbeddingProvider,
    config: InferenceConfig,
) -> list[DialoguePrediction]:
    return [
        predict_chains(dialogue, model, provider, config, gold=corpus.gold)
        for dialogue in corpus.dialogues
    ]


def merge_partitions(predictions: list[DialoguePrediction]) -> dict[str, set[MentionRef]]:
    """Corpus-level predicted partition (cluster labels are dialogue-scoped)."""
    merged: dict[str, set[MentionRef]] = {}
    for prediction in predictions:
        for label, members in prediction.clustering.clusters().items():
            merged[label] = members
    return merged


def audit_records(prediction: DialoguePrediction) -> list[dict]:
    """Per-pair score audit rows {dialogue_id, i, j, l_ij, s_i, s_j}."""
    rows = []
    for (i, j), s in sorted(prediction.adjacency.scores.items()):
        rows.append(
            {
                "dialogue_id": prediction.dialogue_id,
                "i": i,
                "j": j,
                "l_ij": s.link,
                "s_i": s.probing,
                "s_j": s.causal,
            }
        )
    return rows


def partition_records(predictions: list[DialoguePrediction]) -> list[dict]:
    rows = []
    for prediction in predictions:
        for (did, idx), label in sorted(prediction.clustering.assignments.items()):
            rows.append({"dialogue_id": did, "index": idx, "cluster": label})
    return rows


def write_jsonl(rows: list[dict], path: str | Path) -> None:
    text = "".join(json.dumps(r, sort_keys=True, ensure_ascii=False) + "\n" for r in rows)
    Path(path).write_text(text, encoding="utf-8")

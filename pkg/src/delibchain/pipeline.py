"""End-to-end wiring of the pipeline stages.

These helpers keep the CLI commands thin and give tests a single entry
point for "featurize this corpus, train, predict, score" without going
through files.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, InterventionLabel, MentionRef, gold_partition
from .errors import DataValidationError
from .features import EmbeddingProvider, pair_feature
from .inference import DialoguePrediction, InferenceConfig, merge_partitions, predict_corpus
from .metrics import ClusterScoreReport, score
from .pairs import (
    DEFAULT_CONTEXT_K,
    DEFAULT_MAX_SEQUENCE_LEN,
    LabeledPair,
    assemble_pair_text,
    corpus_training_pairs,
)
from .scorer import (
    Alphas,
    JointScorerModel,
    PairLabels,
    TrainConfig,
    TrainData,
    TrainResult,
    train,
)


def featurize_pairs(
    corpus: Corpus,
    pairs: list[LabeledPair],
    provider: EmbeddingProvider,
    k: int = DEFAULT_CONTEXT_K,
    max_sequence_len: int = DEFAULT_MAX_SEQUENCE_LEN,
) -> TrainData:
    """Pair features plus forward and reverse-direction labels."""
    if not pairs:
        raise DataValidationError("no pairs to featurize")
    dialogues = {d.id: d for d in corpus.dialogues}
    rows = []
    for pair in pairs:
        text = assemble_pair_text(
            dialogues[pair.dialogue_id], pair.i, pair.j, k=k, max_sequence_len=max_sequence_len
        )
        rows.append(pair_feature(text, provider).concatenated)

    def flags(getter) -> np.ndarray:
        return np.array([1.0 if getter(p) else 0.0 for p in pairs], dtype=np.float64)

    probing, causal = InterventionLabel.PROBING, InterventionLabel.CAUSAL
    return TrainData(
        features=np.stack(rows),
        labels=PairLabels(
            link=flags(lambda p: p.link),
            probing=flags(lambda p: p.role_j is probing),
            causal=flags(lambda p: p.role_i is causal),
        ),
        reverse_labels=PairLabels(
            link=flags(lambda p: p.link),
            probing=flags(lambda p: p.role_i is probing),
            causal=flags(lambda p: p.role_j is causal),
        ),
    )


@dataclass(frozen=True)
class ScorerSetup:
    window: int
    k: int = DEFAULT_CONTEXT_K
    max_sequence_len: int = DEFAULT_MAX_SEQUENCE_LEN
    hidden: tuple[int, ...] = (128,)
    alphas: Alphas = Alphas()


def train_scorer(
    corpus: Corpus,
    provider: EmbeddingProvider,
    setup: ScorerSetup,
    config: TrainConfig,
) -> TrainResult:
    pairs = corpus_training_pairs(corpus, setup.window)
    data = featurize_pairs(corpus, pairs, provider, k=setup.k, max_sequence_len=setup.max_sequence_len)
    model = JointScorerModel.create(
        feature_dim=provider.dimension,
        hidden=setup.hidden,
        alphas=setup.alphas,
        seed=config.seed,
    )
    return train(model, data, config)


def predicted_partition(predictions: list[DialoguePrediction]) -> dict[str, set[MentionRef]]:
    return merge_partitions(predictions)


def evaluate_predictions(
    corpus: Corpus,
    predictions: list[DialoguePrediction],
) -> ClusterScoreReport:
    """Score the merged predicted partition against the corpus gold."""
    return score(gold_partition(corpus.gold), merge_partitions(predictions))


def run_inference(
    corpus: Corpus,
    model: JointScorerModel,
    provider: EmbeddingProvider,
    config: InferenceConfig,
) -> list[DialoguePrediction]:
    return predict_corpus(corpus, model, provider, config)

import numpy as np
import pytest

from delibchain.baselines import (
    BaselineSpec,
    REFERENCE_THRESHOLDS,
    baseline_link,
    baseline_predict,
    calibrate,
    calibration_pairs,
    pair_similarity,
)
from delibchain.corpus import SynthConfig, gold_partition, synthesize_corpus
from delibchain.errors import ConfigError, DataValidationError
from delibchain.features import HashedBowProvider, lexical_ratio
from delibchain.inference import cluster_links
from delibchain.metrics import score

from helpers import C, N, P, make_corpus


def dev_corpus():
    return make_corpus(
        {
            "d": [
                ("pick u and 6", C, "c0"),
                ("noise here", N, None),
                ("why pick u?", P, "c0"),
                ("try 7 instead", C, "c1"),
                ("should we try 7?", P, "c1"),
            ]
        },
        split="dev",
    )


def test_reference_thresholds_recorded():
    assert REFERENCE_THRESHOLDS[("lexical", "delidata")] == 0.247
    assert REFERENCE_THRESHOLDS[("lexical", "wtd")] == 0.263
    assert REFERENCE_THRESHOLDS[("entity", "delidata")] == 0.287
    assert REFERENCE_THRESHOLDS[("entity", "wtd")] == 0.173
    assert REFERENCE_THRESHOLDS[("cosine", "delidata")] == 0.597
    assert REFERENCE_THRESHOLDS[("cosine", "wtd")] == 0.644


def test_calibration_pairs_are_causal_to_probing():
    pairs = calibration_pairs(dev_corpus())
    assert pairs == [("d", 0, 2), ("d", 3, 4)]
    widened = calibration_pairs(dev_corpus(), all_pairs=True)
    assert ("d", 1, 2) in widened
    assert len(widened) == 2 + 4  # contexts of utterances 2 and 4


def test_lexical_calibration_is_the_mean_ratio():
    corpus = dev_corpus()
    result = calibrate(corpus, "lexical")
    expected = (
        lexical_ratio("pick u and 6", "why pick u?") / 100
        + lexical_ratio("try 7 instead", "should we try 7?") / 100
    ) / 2
    assert result.threshold == pytest.approx(expected, abs=1e-12)
    assert result.n_pairs == 2
    assert result.kind == "lexical"


def test_calibration_is_deterministic_and_hash_tracks_data():
    corpus = dev_corpus()
    a = calibrate(corpus, "entity", schema="delidata")
    b = calibrate(corpus, "entity", schema="delidata")
    assert a == b
    other = make_corpus(
        {"d": [("completely different", C, "c0"), ("words?", P, "c0")]}, split="dev"
    )
    assert calibrate(other, "entity", schema="delidata").dev_split_hash != a.dev_split_hash


def test_calibrate_empty_dev_rejected():
    empty = make_corpus({"d": [("just noise", N, None), ("more noise", N, None)]})
    with pytest.raises(DataValidationError):
        calibrate(empty, "lexical")


def test_baseline_spec_validation():
    with pytest.raises(ConfigError):
        BaselineSpec(kind="soundex", threshold=0.5)
    with pytest.raises(ConfigError):
        BaselineSpec(kind="cosine", threshold=0.5)
    with pytest.raises(ConfigError):
        BaselineSpec(kind="entity", threshold=0.5)


def test_identical_utterances_link_under_any_partial_threshold():
    corpus = make_corpus(
        {"d": [("same words here", C, "c"), ("same words here", P, "c")]}
    )
    dialogue = corpus.dialogue("d")
    for kind, extra in (
        ("lexical", {}),
        ("entity", {"schema": "delidata"}),
        ("cosine", {"provider": HashedBowProvider(32)}),
    ):
        spec = BaselineSpec(kind=kind, threshold=0.9, **extra)
        adjacency = baseline_link(dialogue, spec, [0, 1])
        if kind == "entity":
            # identical but entity-free text has IoU 0: never linked
            assert adjacency.link(0, 1) == 0.0
        else:
            assert adjacency.link(0, 1) == 1.0


def test_zero_similarity_never_links():
    corpus = make_corpus({"d": [("aaaa", C, "c"), ("zzzz?", P, "c")]})
    spec = BaselineSpec(kind="lexical", threshold=0.0)
    adjacency = baseline_link(corpus.dialogue("d"), spec, [0, 1])
    assert adjacency.link(0, 1) == 0.0  # similarity must strictly exceed


def test_raising_threshold_never_adds_links():
    corpus = synthesize_corpus(SynthConfig(n_dialogues=3), 21)
    provider = HashedBowProvider(64)
    for dialogue in corpus.dialogues:
        mentions = corpus.gold.mentions(dialogue.id)
        low = baseline_link(
            dialogue, BaselineSpec("cosine", 0.1, provider=provider), mentions
        )
        high = baseline_link(
            dialogue, BaselineSpec("cosine", 0.6, provider=provider), mentions
        )
        low_links = {k for k, s in low.scores.items() if s.link == 1.0}
        high_links = {k for k, s in high.scores.items() if s.link == 1.0}
        assert high_links <= low_links


def test_linking_is_order_independent():
    corpus = dev_corpus()
    spec = BaselineSpec(kind="lexical", threshold=0.2)
    a = baseline_link(corpus.dialogue("d"), spec, [0, 2, 3, 4])
    b = baseline_link(corpus.dialogue("d"), spec, [4, 3, 2, 0])
    assert a.scores == b.scores


def test_low_threshold_cosine_collapses_precision():
    corpus = synthesize_corpus(SynthConfig(n_dialogues=10), 33)
    corpus = type(corpus)(corpus.dialogues, corpus.gold, "test")
    provider = HashedBowProvider(128)
    spec = BaselineSpec(kind="cosine", threshold=0.02, provider=provider)
    merged = {}
    for did, adjacency in baseline_predict(corpus, spec).items():
        clustering = cluster_links(adjacency, corpus.gold.mentions(did))
        merged.update(clustering.clusters())
    report = score(gold_partition(corpus.gold), merged)
    assert report.b_cubed.recall >= 0.99
    assert report.b_cubed.precision < report.b_cubed.recall


def test_pair_similarity_shared_scale():
    provider = HashedBowProvider(32)
    for kind, extra in (
        ("lexical", {}),
        ("entity", {"schema": "delidata"}),
        ("cosine", {"provider": provider}),
    ):
        spec = BaselineSpec(kind=kind, threshold=0.0, **extra)
        value = pair_similarity(spec, "pick u and 6", "why pick u?")
        assert 0.0 <= value <= 1.0

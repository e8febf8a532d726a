import numpy as np
import pytest

from delibchain.corpus import SynthConfig, gold_partition, synthesize_corpus
from delibchain.errors import ConfigError, DataValidationError
from delibchain.features import HashedBowProvider
from delibchain.inference import (
    AdjacencyMatrix,
    InferenceConfig,
    PairScore,
    all_mentions,
    candidate_pairs,
    cluster_links,
    gold_mentions,
    merge_partitions,
    predict_chains,
    prune_naive,
    score_pairs,
)
from delibchain.scorer import JointScorerModel

from helpers import C, N, P, make_corpus, make_dialogue


def intervention_fixture():
    corpus = make_corpus(
        {
            "d": [
                ("alpha", C, "c0"),
                ("noise", N, None),
                ("beta", C, "c0"),
                ("noise again", N, None),
                ("gamma?", P, "c0"),
                ("delta", C, "c1"),
                ("epsilon?", P, "c1"),
            ]
        }
    )
    return corpus.dialogue("d"), corpus.gold


def constant_model(value: float, feature_dim: int = 16) -> JointScorerModel:
    model = JointScorerModel.create(feature_dim=feature_dim, hidden=(4,), seed=0)
    logit = 25.0 if value >= 0.5 else -25.0
    for head in model.heads.values():
        for w in head.weights:
            w[:] = 0.0
        for b in head.biases:
            b[:] = 0.0
        head.biases[-1][:] = logit
    return model


def test_candidate_pairs_naive_counts():
    dialogue = make_dialogue("d", [f"u{k}" for k in range(9)])
    mentions = [1, 3, 5, 8]
    pairs = candidate_pairs(dialogue, mentions, mode="naive")
    assert len(pairs) == 6
    assert all(i < j for i, j in pairs)


def test_candidate_pairs_window_one_keeps_adjacent_only():
    dialogue = make_dialogue("d", [f"u{k}" for k in range(6)])
    pairs = candidate_pairs(dialogue, [0, 1, 2, 4, 5], mode="windowed", window=1)
    assert pairs == [(0, 1), (1, 2), (4, 5)]


def test_gold_mentions_exclude_neither():
    dialogue, gold = intervention_fixture()
    assert gold_mentions(dialogue, gold) == [0, 2, 4, 5, 6]
    assert all_mentions(dialogue) == list(range(7))


def test_candidate_pairs_validate_inputs():
    dialogue = make_dialogue("d", ["a", "b"])
    with pytest.raises(DataValidationError):
        candidate_pairs(dialogue, [0, 7], mode="naive")
    with pytest.raises(ConfigError):
        candidate_pairs(dialogue, [0, 1], mode="windowed", window=0)
    with pytest.raises(ConfigError):
        candidate_pairs(dialogue, [0, 1], mode="sideways")


# ---------------------------------------------------------------------------
# Scoring
# ---------------------------------------------------------------------------

def test_score_pairs_empty_and_deterministic():
    dialogue, gold = intervention_fixture()
    model = JointScorerModel.create(feature_dim=16, seed=3)
    provider = HashedBowProvider(16)
    assert len(score_pairs(model, dialogue, [], provider)) == 0

    pairs = candidate_pairs(dialogue, gold_mentions(dialogue, gold), mode="naive")
    a = score_pairs(model, dialogue, pairs, provider)
    b = score_pairs(model, dialogue, pairs, provider)
    assert a.scores.keys() == b.scores.keys()
    for key in a.scores:
        assert a.scores[key] == b.scores[key]
        assert 0.0 < a.scores[key].link < 1.0


def test_adjacency_rejects_bad_entries():
    adjacency = AdjacencyMatrix(dialogue_id="d")
    with pytest.raises(DataValidationError):
        adjacency.add(PairScore(i=3, j=1, link=0.5))
    with pytest.raises(DataValidationError):
        adjacency.add(PairScore(i=1, j=3, link=1.5))


# ---------------------------------------------------------------------------
# Pruning
# ---------------------------------------------------------------------------

def test_prune_caps_at_g_times_c():
    scores = [
        PairScore(i=i, j=j, link=0.5, probing=0.1 * ((i + j) % 10), causal=0.5)
        for i in range(12)
        for j in range(i + 1, 12)
    ]
    assert len(scores) == 66
    kept = prune_naive(scores, intervention_count=10, chain_size=5.0)
    assert len(kept) == 50
    assert set(kept) <= set(scores)
    floor = min(s.intervention_mean() for s in kept)
    assert all(s.intervention_mean() <= floor + 1e-12 for s in scores if s not in kept)


def test_prune_keeps_all_when_under_budget():
    scores = [PairScore(i=0, j=1, link=0.5, probing=0.5, causal=0.5)]
    assert prune_naive(scores, 10, 5.0) == scores


def test_prune_tie_break_prefers_earlier_pair():
    scores = [
        PairScore(i=0, j=3, link=0.5, probing=0.4, causal=0.4),
        PairScore(i=0, j=1, link=0.5, probing=0.4, causal=0.4),
        PairScore(i=0, j=2, link=0.5, probing=0.9, causal=0.9),
    ]
    kept = prune_naive(scores, 2, 1.0)
    assert [(s.i, s.j) for s in kept] == [(0, 2), (0, 1)]


def test_prune_rejects_empty_budget():
    with pytest.raises(ConfigError):
        prune_naive([], 0, 5.0)


# ---------------------------------------------------------------------------
# Clustering
# ---------------------------------------------------------------------------

def adjacency_from(did: str, entries: dict[tuple[int, int], float]) -> AdjacencyMatrix:
    adjacency = AdjacencyMatrix(dialogue_id=did)
    for (i, j), link in entries.items():
        adjacency.add(PairScore(i=i, j=j, link=link))
    return adjacency


def test_cluster_links_transitive_closure():
    adjacency = adjacency_from("d", {(1, 2): 0.9, (2, 3): 0.8})
    clustering = cluster_links(adjacency, [1, 2, 3], threshold=0.5)
    labels = {clustering.assignments[("d", m)] for m in (1, 2, 3)}
    assert len(labels) == 1


def test_cluster_links_threshold_is_inclusive():
    adjacency = adjacency_from("d", {(1, 2): 0.5})
    clustering = cluster_links(adjacency, [1, 2], threshold=0.5)
    assert clustering.assignments[("d", 1)] == clustering.assignments[("d", 2)]


def test_all_subthreshold_scores_leave_singletons():
    adjacency = adjacency_from("d", {(1, 2): 0.49, (2, 3): 0.49})
    clustering = cluster_links(adjacency, [1, 2, 3], threshold=0.5)
    labels = [clustering.assignments[("d", m)] for m in (1, 2, 3)]
    assert len(set(labels)) == 3


def test_components_never_merge_without_crossing_edge():
    rng = np.random.default_rng(44)
    for _ in range(50):
        mentions = list(range(8))
        entries = {}
        for i in range(4):
            for j in range(i + 1, 4):
                entries[(i, j)] = float(rng.random())
        for i in range(4, 8):
            for j in range(i + 1, 8):
                entries[(i, j)] = float(rng.random())
        clustering = cluster_links(adjacency_from("d", entries), mentions, threshold=0.3)
        left = {clustering.assignments[("d", m)] for m in range(4)}
        right = {clustering.assignments[("d", m)] for m in range(4, 8)}
        assert not (left & right)


def test_clustering_invariant_to_insertion_order():
    entries = {(1, 2): 0.9, (3, 4): 0.8, (2, 3): 0.7}
    forward_order = adjacency_from("d", entries)
    backward_order = AdjacencyMatrix(dialogue_id="d")
    for key in reversed(list(entries)):
        backward_order.add(PairScore(i=key[0], j=key[1], link=entries[key]))
    a = cluster_links(forward_order, [1, 2, 3, 4])
    b = cluster_links(backward_order, [1, 2, 3, 4])
    assert a.assignments == b.assignments


def test_threshold_monotone_refinement():
    rng = np.random.default_rng(45)
    mentions = list(range(9))
    for _ in range(50):
        entries = {
            (i, j): float(rng.random())
            for i in mentions
            for j in mentions[i + 1 :]
            if rng.random() < 0.4
        }
        adjacency = adjacency_from("d", entries)
        low = cluster_links(adjacency, mentions, threshold=0.3)
        high = cluster_links(adjacency, mentions, threshold=0.7)
        for cluster in high.clusters().values():
            containing = {low.assignments[ref] for ref in cluster}
            assert len(containing) == 1


def test_cluster_links_threshold_bounds():
    adjacency = adjacency_from("d", {(0, 1): 0.9})
    with pytest.raises(ConfigError):
        cluster_links(adjacency, [0, 1], threshold=0.0)
    with pytest.raises(ConfigError):
        cluster_links(adjacency, [0, 1], threshold=1.0)


# ---------------------------------------------------------------------------
# End-to-end prediction
# ---------------------------------------------------------------------------

def test_constant_zero_scorer_yields_no_chains():
    dialogue, gold = intervention_fixture()
    provider = HashedBowProvider(16)
    prediction = predict_chains(
        dialogue,
        constant_model(0.0),
        provider,
        InferenceConfig(mode="windowed", window=10),
        gold=gold,
    )
    assert prediction.chains == []
    # every mention still lands in the partition, as a singleton
    assert len(prediction.clustering.assignments) == 5
    assert len(set(prediction.clustering.assignments.values())) == 5


def test_constant_one_scorer_yields_single_full_chain():
    dialogue, gold = intervention_fixture()
    provider = HashedBowProvider(16)
    prediction = predict_chains(
        dialogue,
        constant_model(1.0),
        provider,
        InferenceConfig(mode="windowed", window=10),
        gold=gold,
    )
    assert len(prediction.chains) == 1
    chain = prediction.chains[0]
    assert [idx for idx, _ in chain.members] == [0, 2, 4, 5, 6]
    assert chain.root == 0
    assert chain.terminal == 6


def test_perfect_adjacency_recovers_gold_partition():
    corpus = synthesize_corpus(SynthConfig(n_dialogues=4), 9)
    for dialogue in corpus.dialogues:
        mentions = gold_mentions(dialogue, corpus.gold)
        entries = {}
        for a, i in enumerate(mentions):
            for j in mentions[a + 1 :]:
                same = corpus.gold.assignments.get((dialogue.id, i)) == corpus.gold.assignments.get(
                    (dialogue.id, j)
                )
                entries[(i, j)] = 1.0 if same else 0.0
        clustering = cluster_links(adjacency_from(dialogue.id, entries), mentions)
        predicted = {frozenset(m) for m in clustering.clusters().values()}
        expected = {
            frozenset(r for r in members if r[0] == dialogue.id)
            for members in corpus.gold.clusters().values()
            if members[0][0] == dialogue.id
        }
        assert predicted == expected


def test_naive_mode_requires_chain_size():
    dialogue, gold = intervention_fixture()
    provider = HashedBowProvider(16)
    with pytest.raises(ConfigError):
        predict_chains(
            dialogue,
            constant_model(1.0),
            provider,
            InferenceConfig(mode="naive", chain_size=None),
            gold=gold,
        )
    prediction = predict_chains(
        dialogue,
        constant_model(1.0),
        provider,
        InferenceConfig(mode="naive", chain_size=2.0),
        gold=gold,
    )
    assert prediction.pruned is not None
    assert len(prediction.pruned) <= 5 * 2


def test_merge_partitions_keeps_dialogues_apart():
    corpus = make_corpus(
        {
            "d1": [("a", C, "d1.c"), ("b?", P, "d1.c")],
            "d2": [("a", C, "d2.c"), ("b?", P, "d2.c")],
        }
    )
    provider = HashedBowProvider(16)
    model = constant_model(1.0)
    predictions = [
        predict_chains(
            d, model, provider, InferenceConfig(mode="windowed", window=5), gold=corpus.gold
        )
        for d in corpus.dialogues
    ]
    merged = merge_partitions(predictions)
    gold = gold_partition(corpus.gold)
    assert {frozenset(v) for v in merged.values()} == {frozenset(v) for v in gold.values()}
    for members in merged.values():
        assert len({did for did, _ in members}) == 1

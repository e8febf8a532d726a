import json

import numpy as np
import pytest

from delibchain.corpus import (
    Corpus,
    GoldClustering,
    InterventionLabel,
    SynthConfig,
    chain_size_stat,
    corpus_statistics,
    load_corpus,
    synthesize_corpus,
    validate_corpus,
    write_corpus,
)
from delibchain.errors import ConfigError, DataValidationError, ParseError

from helpers import C, N, P, make_corpus, random_corpus


def two_dialogue_corpus() -> Corpus:
    return make_corpus(
        {
            "g1": [
                ("pick a card", N, None),
                ("i chose u and 6", C, "g1.c0"),
                ("sounds right", N, None),
                ("why那 u?", P, "g1.c0"),
                ("let us test 7", C, "g1.c1"),
                ("should we test 7?", P, "g1.c1"),
            ],
            "g2": [
                ("the rule needs vowels", C, "g2.c0"),
                ("hmm", N, None),
                ("are we sure about vowels?", P, "g2.c0"),
            ],
        }
    )


def test_round_trip_two_dialogues_three_clusters(tmp_path):
    corpus = two_dialogue_corpus()
    path = tmp_path / "corpus.jsonl"
    write_corpus(corpus, path)
    loaded = load_corpus(path)
    assert loaded == corpus
    assert len(loaded.dialogues) == 2
    assert corpus_statistics(loaded).n_clusters == 3


def test_singleton_cluster_rejected(tmp_path):
    corpus = make_corpus(
        {"d": [("one", C, "c0"), ("two", P, "c0"), ("odd", C, "c1")]},
        validate=False,
    )
    with pytest.raises(DataValidationError, match="singleton"):
        validate_corpus(corpus)

    path = tmp_path / "c.jsonl"
    write_corpus(two_dialogue_corpus(), path)
    rows = [json.loads(line) for line in path.read_text().splitlines()]
    rows[1]["cluster_id"] = "lonely"  # first utterance of g1 is labeled N
    rows[1]["label"] = "C"
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
    with pytest.raises(DataValidationError, match="singleton"):
        load_corpus(path)


def test_cross_dialogue_cluster_rejected():
    corpus = make_corpus(
        {
            "d1": [("a", C, "shared"), ("b", P, "shared")],
            "d2": [("c", C, "shared"), ("d", P, "shared")],
        },
        validate=False,
    )
    with pytest.raises(DataValidationError, match="spans multiple dialogues"):
        validate_corpus(corpus)


def test_neither_utterance_in_cluster_rejected():
    corpus = make_corpus({"d": [("a", N, "c0"), ("b", P, "c0")]}, validate=False)
    with pytest.raises(DataValidationError):
        validate_corpus(corpus)


def test_labeled_utterance_without_cluster_rejected():
    corpus = make_corpus(
        {"d": [("a", C, "c0"), ("b", P, "c0"), ("c", C, None)]}, validate=False
    )
    with pytest.raises(DataValidationError, match="missing a cluster"):
        validate_corpus(corpus)


def test_empty_corpus_writes_header_only(tmp_path):
    corpus = Corpus(dialogues=(), gold=GoldClustering(), split_name="dev")
    path = tmp_path / "empty.jsonl"
    write_corpus(corpus, path)
    lines = path.read_text().splitlines()
    assert len(lines) == 1
    header = json.loads(lines[0])
    assert header["record"] == "header"
    assert load_corpus(path).split_name == "dev"


def test_unicode_speakers_and_text_round_trip(tmp_path):
    corpus = make_corpus(
        {"d": [("víčko 光 test", C, "c0"), ("pourquoi ça?", P, "c0")]},
    )
    path = tmp_path / "u.jsonl"
    write_corpus(corpus, path)
    assert load_corpus(path) == corpus


def test_randomized_round_trips(tmp_path):
    rng = np.random.default_rng(99)
    path = tmp_path / "rt.jsonl"
    for _ in range(200):
        corpus = random_corpus(rng)
        write_corpus(corpus, path)
        assert load_corpus(path) == corpus


def test_parse_error_carries_line_number(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"record": "header", "schema": "delidata", "split": "train"}\n{oops\n')
    with pytest.raises(ParseError, match="bad.jsonl:2"):
        load_corpus(path)


def test_tsv_rows_accepted(tmp_path):
    path = tmp_path / "fixture.tsv"
    path.write_text(
        "d1\t0\tana\ti chose u and 6\tC\tc0\n"
        "d1\t1\tbo\twhy u?\tP\tc0\n"
    )
    corpus = load_corpus(path, format="delidata-like", split_name="dev")
    assert corpus.split_name == "dev"
    assert corpus.schema == "delidata"
    assert corpus.gold.label_of(("d1", 1)) is InterventionLabel.PROBING


def test_noncontiguous_indices_rejected(tmp_path):
    path = tmp_path / "gap.tsv"
    path.write_text("d1\t0\tana\ta\tC\tc0\nd1\t2\tbo\tb\tP\tc0\n")
    with pytest.raises(DataValidationError, match="0..N-1"):
        load_corpus(path)


def test_missing_file_is_config_error():
    with pytest.raises(ConfigError):
        load_corpus("/nonexistent/nope.jsonl")


def test_unknown_format_rejected(tmp_path):
    path = tmp_path / "x.jsonl"
    path.write_text("")
    with pytest.raises(ConfigError):
        load_corpus(path, format="csv")


# ---------------------------------------------------------------------------
# Synthesis
# ---------------------------------------------------------------------------

def test_synth_deterministic():
    config = SynthConfig(n_dialogues=8)
    assert synthesize_corpus(config, 7) == synthesize_corpus(config, 7)
    assert synthesize_corpus(config, 7) != synthesize_corpus(config, 8)


def test_synth_hits_shape_targets():
    config = SynthConfig(n_dialogues=100, mean_dialogue_len=33.0, mean_chain_len=5.0)
    stats = corpus_statistics(synthesize_corpus(config, 3))
    assert abs(stats.mean_dialogue_len - 33.0) <= 0.2 * 33.0
    assert abs(stats.mean_chain_len - 5.0) <= 0.2 * 5.0


def test_synth_never_plants_singletons():
    for seed in range(5):
        corpus = synthesize_corpus(SynthConfig(n_dialogues=10, mean_chain_len=2.0), seed)
        assert corpus_statistics(corpus).min_chain_len >= 2


def test_synth_members_share_signature_tokens():
    corpus = synthesize_corpus(SynthConfig(n_dialogues=6), 11)
    shared = 0
    for members in corpus.gold.clusters().values():
        did = members[0][0]
        dialogue = corpus.dialogue(did)
        token_sets = [
            set(dialogue.utterances[idx].text.lower().split()) for _, idx in members
        ]
        common = set.intersection(*token_sets)
        shared += bool(common)
    assert shared >= 0.9 * len(corpus.gold.clusters())


def test_synth_infeasible_config_rejected():
    with pytest.raises(ConfigError):
        synthesize_corpus(SynthConfig(mean_chain_len=40.0, mean_dialogue_len=30.0), 0)
    with pytest.raises(ConfigError):
        synthesize_corpus(SynthConfig(mean_chain_len=1.0), 0)


# ---------------------------------------------------------------------------
# Reference-shaped fixture (statistics of the published test split)
# ---------------------------------------------------------------------------

def reference_shaped_corpus() -> Corpus:
    """100 dialogues, 206 chains, 358 probing + 700 causal members."""
    n_clusters, n_probing, n_causal = 206, 358, 700
    probing_left = n_probing - n_clusters
    causal_left = n_causal - n_clusters
    sizes = []
    for k in range(n_clusters):
        extra_p = probing_left // n_clusters + (1 if k < probing_left % n_clusters else 0)
        extra_c = causal_left // n_clusters + (1 if k < causal_left % n_clusters else 0)
        sizes.append((1 + extra_p, 1 + extra_c))
    spec: dict[str, list] = {}
    cluster_idx = 0
    for d in range(100):
        rows: list = []
        for _ in range(3 if d < 6 else 2):
            if cluster_idx >= n_clusters:
                break
            n_p, n_c = sizes[cluster_idx]
            label = f"t{cluster_idx}"
            for _ in range(n_c):
                rows.append((f"cause {cluster_idx}", C, label))
            for _ in range(n_p):
                rows.append((f"probe {cluster_idx}?", P, label))
            cluster_idx += 1
        while len(rows) < 10:
            rows.append(("filler", N, None))
        spec[f"t{d:03d}"] = rows
    assert cluster_idx == n_clusters
    return make_corpus(spec, split="test")


def test_reference_shaped_fixture_loads_with_published_counts(tmp_path):
    corpus = reference_shaped_corpus()
    path = tmp_path / "ref.jsonl"
    write_corpus(corpus, path)
    stats = corpus_statistics(load_corpus(path, split_name="test"))
    assert stats.n_probing == 358
    assert stats.n_causal == 700
    assert stats.n_clusters == 206
    assert stats.mean_chain_len == pytest.approx(1058 / 206, abs=1e-9)


def test_chain_size_stat():
    corpus = two_dialogue_corpus()
    assert chain_size_stat(corpus, "mean") == 2.0
    assert chain_size_stat(corpus, "max") == 2.0
    with pytest.raises(ConfigError):
        chain_size_stat(corpus, "median")

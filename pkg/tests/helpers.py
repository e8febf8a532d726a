"""Shared construction helpers for the test suite."""

from __future__ import annotations

import numpy as np

from delibchain.corpus import (
    Corpus,
    Dialogue,
    GoldClustering,
    InterventionLabel,
    Utterance,
    validate_corpus,
)

P = InterventionLabel.PROBING
C = InterventionLabel.CAUSAL
N = InterventionLabel.NEITHER


def make_dialogue(did: str, texts: list[str], schema: str = "delidata",
                  speakers: list[str] | None = None) -> Dialogue:
    speakers = speakers or ["ana", "bo", "chen"]
    return Dialogue(
        id=did,
        utterances=tuple(
            Utterance(id=f"u{k}", speaker=speakers[k % len(speakers)], text=t, index=k)
            for k, t in enumerate(texts)
        ),
        task_schema=schema,
    )


def make_corpus(spec: dict[str, list[tuple[str, InterventionLabel, str | None]]],
                schema: str = "delidata", split: str = "train",
                validate: bool = True) -> Corpus:
    """Corpus from {dialogue_id: [(text, label, cluster_id), ...]}."""
    dialogues = []
    gold = GoldClustering()
    for did, rows in spec.items():
        texts = []
        for idx, (text, label, cluster) in enumerate(rows):
            texts.append(text)
            gold.labels[(did, idx)] = label
            if cluster is not None:
                gold.assignments[(did, idx)] = cluster
        dialogues.append(make_dialogue(did, texts, schema=schema))
    corpus = Corpus(dialogues=tuple(dialogues), gold=gold, split_name=split)
    if validate:
        validate_corpus(corpus)
    return corpus


def random_corpus(rng: np.random.Generator, schema: str = "delidata") -> Corpus:
    """Small random corpus with valid gold clusters, for round-trip tests."""
    words = ["kana", "belo", "tsuru", "mora", "visk", "æther", "niño", "光", "r2"]
    spec: dict[str, list] = {}
    for d in range(int(rng.integers(1, 4))):
        did = f"d{d}"
        n = int(rng.integers(5, 12))
        rows: list[tuple[str, InterventionLabel, str | None]] = [
            (" ".join(rng.choice(words, size=3)), N, None) for _ in range(n)
        ]
        n_chains = int(rng.integers(1, 3))
        slots = sorted(rng.choice(n, size=min(n, 2 * n_chains), replace=False).tolist())
        for c in range(n_chains):
            members = slots[2 * c : 2 * c + 2]
            if len(members) < 2:
                break
            cluster = f"{did}.c{c}"
            text_a = " ".join(rng.choice(words, size=4))
            text_b = " ".join(rng.choice(words, size=4)) + "?"
            rows[members[0]] = (text_a, C, cluster)
            rows[members[1]] = (text_b, P, cluster)
        spec[did] = rows
    return make_corpus(spec, schema=schema)

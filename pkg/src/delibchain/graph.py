"""Deliberation graphs and chains.

A deliberation graph is a weighted acyclic graph over intervention
utterances whose edges always run forward in time, weakly connected
within each chain. The canonical edge set materializes only the
immediate-successor path inside each cluster; the full transitive
closure is recomputed on demand and yields the same components.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .corpus import Dialogue, GoldClustering, InterventionLabel, MentionRef
from .errors import DataValidationError

Edge = tuple[MentionRef, MentionRef]


@dataclass
class DeliberationGraph:
    vertices: dict[MentionRef, InterventionLabel | None]
    edges: dict[Edge, float]
    clusters: dict[str, tuple[MentionRef, ...]]

    def components(self) -> list[set[MentionRef]]:
        """Weakly-connected components over the current edge set."""
        neighbours: dict[MentionRef, set[MentionRef]] = {v: set() for v in self.vertices}
        for (a, b) in self.edges:
            neighbours.setdefault(a, set()).add(b)
            neighbours.setdefault(b, set()).add(a)
        seen: set[MentionRef] = set()
        out = []
        for start in sorted(neighbours):
            if start in seen:
                continue
            stack = [start]
            comp = set()
            while stack:
                node = stack.pop()
                if node in comp:
                    continue
                comp.add(node)
                stack.extend(neighbours[node] - comp)
            seen |= comp
            out.append(comp)
        return out


@dataclass(frozen=True)
class DeliberationChain:
    dialogue_id: str
    cluster_label: str
    members: tuple[tuple[int, InterventionLabel | None], ...]
    root: int | None
    terminal: int | None
    degenerate: bool = False


@dataclass(frozen=True)
class ValidationReport:
    acyclic: bool
    weakly_connected_per_chain: bool
    cross_dialogue_edges: int

    @property
    def ok(self) -> bool:
        return self.acyclic and self.weakly_connected_per_chain and self.cross_dialogue_edges == 0


def _cluster_map(clustering) -> dict[str, list[MentionRef]]:
    out: dict[str, list[MentionRef]] = {}
    for ref, label in clustering.assignments.items():
        out.setdefault(label, []).append(ref)
    for members in out.values():
        members.sort()
    return out


def _labels_of(clustering) -> dict[MentionRef, InterventionLabel]:
    return dict(getattr(clustering, "labels", {}) or {})


def build_graph(
    dialogue: Dialogue,
    clustering,
    link_scores: dict[tuple[int, int], float] | None = None,
) -> DeliberationGraph:
    """Materialize the chain-path graph of one dialogue's clustering.

    Within each cluster, every member is linked to its immediate temporal
    successor. Edge weights are taken from ``link_scores`` (keyed by
    (i, j) utterance indices) when present, else 1.0. Accepts gold or
    predicted clusterings; both expose ``assignments``.
    """
    known = {u.index for u in dialogue.utterances}
    labels = _labels_of(clustering)
    vertices: dict[MentionRef, InterventionLabel | None] = {}
    edges: dict[Edge, float] = {}
    clusters: dict[str, tuple[MentionRef, ...]] = {}
    for cluster, members in sorted(_cluster_map(clustering).items()):
        in_dialogue = [ref for ref in members if ref[0] == dialogue.id]
        if not in_dialogue:
            continue  # cluster belongs to a different dialogue entirely
        if len(in_dialogue) != len(members):
            raise DataValidationError(
                f"cluster {cluster!r} spans dialogues; restrict the clustering first"
            )
        for ref in in_dialogue:
            if ref[1] not in known:
                raise DataValidationError(
                    f"cluster {cluster!r} member {ref} outside dialogue {dialogue.id!r}"
                )
            vertices[ref] = labels.get(ref)
        clusters[cluster] = tuple(in_dialogue)
        for a, b in zip(in_dialogue, in_dialogue[1:]):
            weight = 1.0
            if link_scores is not None:
                weight = link_scores.get((a[1], b[1]), 1.0)
            edges[(a, b)] = weight
    return DeliberationGraph(vertices=vertices, edges=edges, clusters=clusters)


def validate_graph(graph: DeliberationGraph) -> ValidationReport:
    """Check structural properties without raising; purely a report."""
    acyclic = all(a[1] < b[1] for (a, b) in graph.edges if a[0] == b[0])
    cross = sum(1 for (a, b) in graph.edges if a[0] != b[0])

    connected = True
    components = graph.components()
    for members in graph.clusters.values():
        member_set = set(members)
        if len(member_set) < 2:
            continue
        if not any(member_set <= comp for comp in components):
            connected = False
            break
    return ValidationReport(
        acyclic=acyclic,
        weakly_connected_per_chain=connected,
        cross_dialogue_edges=cross,
    )


def transitive_closure(edges: set[Edge] | dict[Edge, float]) -> set[Edge]:
    """All (a, b) pairs reachable through directed paths; idempotent."""
    succ: dict[MentionRef, set[MentionRef]] = {}
    for a, b in edges:
        succ.setdefault(a, set()).add(b)
    closed: set[Edge] = set()
    for start in succ:
        stack = list(succ[start])
        reach: set[MentionRef] = set()
        while stack:
            node = stack.pop()
            if node in reach:
                continue
            reach.add(node)
            stack.extend(succ.get(node, ()))
        closed.update((start, node) for node in reach)
    return closed


def chains_from_clusters(clustering, dialogue: Dialogue) -> list[DeliberationChain]:
    """Order each cluster temporally and locate its root and terminal.

    The root is the earliest causal member, the terminal the latest
    probing member. Clusters missing either role (possible in predicted
    clusterings) are kept and flagged degenerate; singleton clusters are
    never emitted as chains.
    """
    labels = _labels_of(clustering)
    chains = []
    for cluster, members in sorted(_cluster_map(clustering).items()):
        in_dialogue = sorted(ref[1] for ref in members if ref[0] == dialogue.id)
        if len(in_dialogue) < 2:
            continue
        member_labels = [labels.get((dialogue.id, idx)) for idx in in_dialogue]
        causal = [
            idx
            for idx, label in zip(in_dialogue, member_labels)
            if label is InterventionLabel.CAUSAL
        ]
        probing = [
            idx
            for idx, label in zip(in_dialogue, member_labels)
            if label is InterventionLabel.PROBING
        ]
        chains.append(
            DeliberationChain(
                dialogue_id=dialogue.id,
                cluster_label=cluster,
                members=tuple(zip(in_dialogue, member_labels)),
                root=min(causal) if causal else None,
                terminal=max(probing) if probing else None,
                degenerate=not (causal and probing),
            )
        )
    return chains


def gold_chains(gold: GoldClustering, dialogue: Dialogue) -> list[DeliberationChain]:
    return chains_from_clusters(gold, dialogue)


def chain_record(chain: DeliberationChain) -> dict:
    """JSON-serializable export form of one chain."""
    return {
        "dialogue_id": chain.dialogue_id,
        "cluster_label": chain.cluster_label,
        "members": [
            {"index": idx, "label": label.value if label is not None else None}
            for idx, label in chain.members
        ],
        "root": chain.root,
        "terminal": chain.terminal,
        "degenerate": chain.degenerate,
    }


def export_chains(chains: list[DeliberationChain]) -> str:
    """One JSON line per chain, in (dialogue, cluster) order."""
    ordered = sorted(chains, key=lambda c: (c.dialogue_id, c.cluster_label))
    return "".join(
        json.dumps(chain_record(c), sort_keys=True, ensure_ascii=False) + "\n"
        for c in ordered
    )

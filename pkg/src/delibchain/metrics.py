"""Coreference-style cluster scoring: MUC, B³, CEAFe and their CoNLL mean.

Partitions are mappings from cluster label to member set (labels are
ignored by every metric). Both partitions must cover the same mention
universe. Division-by-zero conventions: empty denominators score 0, and
the harmonic mean of (0, 0) is 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Hashable, Iterable, Mapping

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DataValidationError

Partition = list[frozenset]


def _normalize(partition) -> Partition:
    """Accept mapping label → members or iterable of member sets."""
    if isinstance(partition, Mapping):
        groups: Iterable = partition.values()
    else:
        groups = partition
    out = [frozenset(g) for g in groups if len(g) > 0]
    seen: set[Hashable] = set()
    for group in out:
        if seen & group:
            raise DataValidationError("clusters overlap; not a partition")
        seen |= group
    return out


def _check_universe(gold: Partition, pred: Partition) -> None:
    gold_mentions = frozenset().union(*gold) if gold else frozenset()
    pred_mentions = frozenset().union(*pred) if pred else frozenset()
    if gold_mentions != pred_mentions:
        missing = gold_mentions ^ pred_mentions
        raise DataValidationError(
            f"partitions cover different mention universes ({len(missing)} mismatched)"
        )


@dataclass(frozen=True)
class MetricScore:
    recall: float
    precision: float
    f1: float


def _prf(r_num: float, r_den: float, p_num: float, p_den: float) -> MetricScore:
    recall = r_num / r_den if r_den > 0 else 0.0
    precision = p_num / p_den if p_den > 0 else 0.0
    if recall + precision == 0.0:
        f1 = 0.0
    else:
        f1 = 2.0 * recall * precision / (recall + precision)
    return MetricScore(recall=recall, precision=precision, f1=f1)


def _mention_index(partition: Partition) -> dict:
    index = {}
    for k, cluster in enumerate(partition):
        for mention in cluster:
            index[mention] = k
    return index


def _muc_counts(key: Partition, response: Partition) -> tuple[float, float]:
    """Link-style numerator/denominator of MUC seen from ``key``'s side."""
    resp_index = _mention_index(response)
    num = 0.0
    den = 0.0
    for cluster in key:
        blocks = {resp_index.get(m, ("solo", m)) for m in cluster}
        num += len(cluster) - len(blocks)
        den += len(cluster) - 1
    return num, den


def muc(gold, pred) -> MetricScore:
    gold_p, pred_p = _normalize(gold), _normalize(pred)
    _check_universe(gold_p, pred_p)
    r_num, r_den = _muc_counts(gold_p, pred_p)
    p_num, p_den = _muc_counts(pred_p, gold_p)
    return _prf(r_num, r_den, p_num, p_den)


def _b_cubed_sum(key: Partition, response: Partition) -> tuple[float, float]:
    """Per-mention overlap sum of |K(m) ∩ R(m)| / |K(m)|."""
    resp_index = _mention_index(response)
    total = 0.0
    count = 0
    for cluster in key:
        for mention in cluster:
            resp_cluster = response[resp_index[mention]]
            total += len(cluster & resp_cluster) / len(cluster)
            count += 1
    return total, float(count)


def b_cubed(gold, pred) -> MetricScore:
    gold_p, pred_p = _normalize(gold), _normalize(pred)
    _check_universe(gold_p, pred_p)
    r_num, r_den = _b_cubed_sum(gold_p, pred_p)
    p_num, p_den = _b_cubed_sum(pred_p, gold_p)
    return _prf(r_num, r_den, p_num, p_den)


def phi4(a: frozenset, b: frozenset) -> float:
    """Entity similarity 2|a ∩ b| / (|a| + |b|)."""
    if not a or not b:
        return 0.0
    return 2.0 * len(a & b) / (len(a) + len(b))


def ceaf_e(gold, pred) -> MetricScore:
    """Optimal one-to-one cluster alignment under the phi4 similarity."""
    gold_p, pred_p = _normalize(gold), _normalize(pred)
    _check_universe(gold_p, pred_p)
    if not gold_p or not pred_p:
        return _prf(0.0, float(len(gold_p)), 0.0, float(len(pred_p)))
    sim = np.zeros((len(gold_p), len(pred_p)), dtype=np.float64)
    for g, g_cluster in enumerate(gold_p):
        for p, p_cluster in enumerate(pred_p):
            sim[g, p] = phi4(g_cluster, p_cluster)
    rows, cols = linear_sum_assignment(sim, maximize=True)
    best = float(sim[rows, cols].sum())
    return _prf(best, float(len(gold_p)), best, float(len(pred_p)))


def conll_f1(muc_f1: float, b_cubed_f1: float, ceaf_e_f1: float) -> float:
    """Arithmetic mean of the three F1 scores."""
    return (muc_f1 + b_cubed_f1 + ceaf_e_f1) / 3.0


@dataclass(frozen=True)
class ClusterScoreReport:
    muc: MetricScore
    b_cubed: MetricScore
    ceaf_e: MetricScore
    conll_f1: float

    def to_dict(self) -> dict:
        def triple(score: MetricScore) -> dict:
            return {"recall": score.recall, "precision": score.precision, "f1": score.f1}

        return {
            "muc": triple(self.muc),
            "b_cubed": triple(self.b_cubed),
            "ceaf_e": triple(self.ceaf_e),
            "conll_f1": self.conll_f1,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def score(gold, pred) -> ClusterScoreReport:
    muc_score = muc(gold, pred)
    b3_score = b_cubed(gold, pred)
    ceafe_score = ceaf_e(gold, pred)
    return ClusterScoreReport(
        muc=muc_score,
        b_cubed=b3_score,
        ceaf_e=ceafe_score,
        conll_f1=conll_f1(muc_score.f1, b3_score.f1, ceafe_score.f1),
    )


def format_report(report: ClusterScoreReport) -> str:
    """Aligned-column text table of the full report."""
    rows = [("MUC", report.muc), ("B3", report.b_cubed), ("CEAFe", report.ceaf_e)]
    lines = [f"{'metric':<8}{'R':>8}{'P':>8}{'F1':>8}"]
    for name, triple in rows:
        lines.append(
            f"{name:<8}{triple.recall * 100:>8.1f}{triple.precision * 100:>8.1f}"
            f"{triple.f1 * 100:>8.1f}"
        )
    lines.append(f"{'CoNLL':<8}{'':>8}{'':>8}{report.conll_f1 * 100:>8.1f}")
    return "\n".join(lines) + "\n"

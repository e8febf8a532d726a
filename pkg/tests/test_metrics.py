import numpy as np
import pytest

from delibchain.errors import DataValidationError
from delibchain.metrics import (
    b_cubed,
    ceaf_e,
    conll_f1,
    format_report,
    muc,
    phi4,
    score,
)

from oracles import b_cubed_oracle, ceaf_e_oracle, muc_oracle, random_partition_pair

WORKED_GOLD = [{"a", "b", "c"}, {"d", "e"}]
WORKED_PRED = [{"a", "b"}, {"c", "d", "e"}]


def test_muc_identity():
    s = muc(WORKED_GOLD, WORKED_GOLD)
    assert (s.recall, s.precision, s.f1) == (1.0, 1.0, 1.0)


def test_muc_worked_example():
    s = muc(WORKED_GOLD, WORKED_PRED)
    assert s.recall == pytest.approx(2 / 3, abs=1e-12)
    assert s.precision == pytest.approx(2 / 3, abs=1e-12)
    assert s.f1 == pytest.approx(2 / 3, abs=1e-12)


def test_muc_all_singletons_pred_has_zero_recall():
    pred = [{m} for cluster in WORKED_GOLD for m in cluster]
    s = muc(WORKED_GOLD, pred)
    assert s.recall == 0.0
    assert s.f1 == 0.0


def test_b_cubed_worked_example():
    s = b_cubed(WORKED_GOLD, WORKED_PRED)
    assert s.recall == pytest.approx(11 / 15, abs=1e-12)
    assert s.precision == pytest.approx(11 / 15, abs=1e-12)


def test_b_cubed_one_big_cluster():
    pred = [{"a", "b", "c", "d", "e"}]
    s = b_cubed(WORKED_GOLD, pred)
    assert s.recall == 1.0
    assert s.precision == pytest.approx((9 + 4) / 25, abs=1e-12)


def test_ceaf_e_worked_example():
    s = ceaf_e(WORKED_GOLD, WORKED_PRED)
    assert s.recall == pytest.approx(0.8, abs=1e-12)
    assert s.precision == pytest.approx(0.8, abs=1e-12)


def test_ceaf_e_flips_recall_precision_relation_vs_b_cubed():
    pred = [{"a", "b", "c", "d", "e"}]
    b3 = b_cubed(WORKED_GOLD, pred)
    ce = ceaf_e(WORKED_GOLD, pred)
    assert b3.recall > b3.precision
    assert ce.precision > ce.recall


def test_phi4():
    assert phi4(frozenset("abc"), frozenset("ab")) == pytest.approx(0.8)
    assert phi4(frozenset(), frozenset("ab")) == 0.0


def test_conll_is_mean():
    assert conll_f1(1.0, 1.0, 1.0) == 1.0
    assert conll_f1(0.0, 0.0, 0.0) == 0.0
    assert conll_f1(2 / 3, 11 / 15, 4 / 5) == pytest.approx(11 / 15, abs=1e-12)


def test_score_report_on_worked_example():
    report = score(WORKED_GOLD, WORKED_PRED)
    assert report.muc.f1 == pytest.approx(2 / 3, abs=1e-12)
    assert report.b_cubed.f1 == pytest.approx(11 / 15, abs=1e-12)
    assert report.ceaf_e.f1 == pytest.approx(0.8, abs=1e-12)
    assert report.conll_f1 == pytest.approx(11 / 15, abs=1e-12)
    table = format_report(report)
    assert "CoNLL" in table and "73.3" in table


def test_label_permutation_invariance():
    as_mapping = {"x": {"a", "b", "c"}, "y": {"d", "e"}}
    relabeled = {"q9": {"d", "e"}, "zz": {"a", "b", "c"}}
    for metric in (muc, b_cubed, ceaf_e):
        assert metric(as_mapping, WORKED_PRED) == metric(relabeled, WORKED_PRED)


def test_refining_pred_reduces_muc_recall():
    pred_equal = [{"a", "b", "c"}, {"d", "e"}]
    pred_split = [{"a", "b"}, {"c"}, {"d", "e"}]
    assert muc(WORKED_GOLD, pred_split).recall < muc(WORKED_GOLD, pred_equal).recall


def test_universe_mismatch_rejected():
    with pytest.raises(DataValidationError):
        muc(WORKED_GOLD, [{"a", "b"}, {"c", "d"}])


def test_overlapping_clusters_rejected():
    with pytest.raises(DataValidationError):
        b_cubed([{"a", "b"}, {"b", "c"}], [{"a", "b", "c"}])


def test_empty_partitions_score_zero():
    report = score([], [])
    assert report.conll_f1 == 0.0


def test_matches_oracles_on_random_partitions():
    rng = np.random.default_rng(1730)
    for _ in range(150):
        gold, pred = random_partition_pair(rng)
        report = score(gold, pred)
        for ours, oracle in (
            (report.muc, muc_oracle(gold, pred)),
            (report.b_cubed, b_cubed_oracle(gold, pred)),
            (report.ceaf_e, ceaf_e_oracle(gold, pred)),
        ):
            assert ours.recall == pytest.approx(oracle[0], abs=1e-9)
            assert ours.precision == pytest.approx(oracle[1], abs=1e-9)
            assert ours.f1 == pytest.approx(oracle[2], abs=1e-9)

"""Accuracy, fairness gaps, post-processing, relative gains, shift diagnostics."""

from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dadt.data import EMPTY_PATH, EQ, Attribute, Schema, SplitCondition, dataset_from_rows
from dadt.errors import DomainError, GroupMissing, NoPositives
from dadt.knowledge import KnowledgeRegime, build_from_target_sample
from dadt.metrics import (
    accuracy,
    attribute_shift_report,
    demographic_parity,
    equal_opportunity,
    evaluate_model,
    positive_scores,
    postprocess_thresholds,
    relative_gain_acc,
    relative_gain_fairness,
    tree_shift_distance,
)
from dadt.stats import Distribution
from dadt.tree import DecisionTree, Internal, Leaf, TreeConfig

from conftest import binary_schema, rows_dataset


class ConstantModel:
    def __init__(self, label):
        self.label = label

    def predict_dataset(self, d):
        return np.array([self.label] * d.n, dtype=object)


class EchoModel:
    def predict_dataset(self, d):
        return d.class_column().copy()


def two_leaf_tree(schema, p_left_pos, p_right_pos, protected="X1"):
    """Split on the protected attribute; leaves carry the given positive scores."""
    left = Leaf(Distribution(("0", "1"), (1 - p_left_pos, p_left_pos)), 10, EMPTY_PATH)
    right = Leaf(Distribution(("0", "1"), (1 - p_right_pos, p_right_pos)), 10, EMPTY_PATH)
    root = Internal(SplitCondition(protected, EQ, "0"), left, right, 0.1)
    return DecisionTree(root=root, config=TreeConfig(), schema=schema,
                        x_w=None, diagnostics={})


def labeled_rows(spec):
    """spec: list of (x1, x2, y) strings."""
    return rows_dataset(binary_schema(), [
        {"X1": a, "X2": b, "Y": y} for a, b, y in spec
    ])


class TestAccuracy:
    def test_echo_is_perfect(self):
        d = labeled_rows([("0", "0", "0"), ("1", "0", "1")] * 3)
        assert accuracy(EchoModel(), d) == 1.0

    def test_constant_majority_rate(self):
        d = labeled_rows([("0", "0", "1")] * 6 + [("0", "0", "0")] * 4)
        assert accuracy(ConstantModel("1"), d) == pytest.approx(0.6)


class TestFairnessGaps:
    def test_dp_hand_rates(self):
        # group X1=0: 6 rows, predict positive iff X2=1 -> rates by construction
        d = labeled_rows([("0", "1", "1")] * 3 + [("0", "0", "0")] * 2
                         + [("0", "1", "1")] * 1 + [("1", "1", "1")] * 2
                         + [("1", "0", "0")] * 2)

        class X2Model:
            def predict_dataset(self, data):
                return np.where(data.column("X2") == "1",
                                np.array("1", dtype=object), np.array("0", dtype=object))

        # group 0: 4/6 positive; group 1: 2/4 positive -> |2/3 - 1/2| = 1/6
        assert demographic_parity(X2Model(), d, "X1", "1") == pytest.approx(1 / 6)

    def test_dp_symmetric_zero(self):
        d = labeled_rows([("0", "0", "1"), ("1", "0", "1")] * 4)
        assert demographic_parity(ConstantModel("1"), d, "X1", "1") == 0.0

    def test_eop_hand_confusion(self):
        # group 0: (TP,FN)=(3,1); group 1: (TP,FN)=(1,1) -> |0.75-0.5|=0.25
        spec = ([("0", "1", "1")] * 3 + [("0", "0", "1")] * 1
                + [("1", "1", "1")] * 1 + [("1", "0", "1")] * 1
                + [("0", "0", "0"), ("1", "0", "0")])
        d = labeled_rows(spec)

        class X2Model:
            def predict_dataset(self, data):
                return np.where(data.column("X2") == "1",
                                np.array("1", dtype=object), np.array("0", dtype=object))

        assert equal_opportunity(X2Model(), d, "X1", "1") == pytest.approx(0.25)

    def test_perfect_classifier_zero_eop(self):
        d = labeled_rows([("0", "0", "1"), ("1", "0", "1"), ("0", "0", "0"), ("1", "0", "0")])
        assert equal_opportunity(EchoModel(), d, "X1", "1") == 0.0

    def test_group_missing(self):
        d = labeled_rows([("0", "0", "1")] * 4)
        with pytest.raises(GroupMissing):
            demographic_parity(ConstantModel("1"), d, "X1", "1")

    def test_no_positives(self):
        d = labeled_rows([("0", "0", "1"), ("1", "0", "0")])
        with pytest.raises(NoPositives):
            equal_opportunity(ConstantModel("1"), d, "X1", "1")

    def test_evaluate_model_collects_notes(self):
        d = labeled_rows([("0", "0", "1"), ("1", "0", "0")])
        report = evaluate_model(ConstantModel("1"), d, "X1")
        assert report.acc == 0.5
        assert report.dp == 0.0
        assert report.eop is None
        assert any("positive" in n for n in report.notes)

    def test_confusion_counts_sum(self):
        d = labeled_rows([("0", "1", "1"), ("0", "0", "0"), ("1", "1", "0"), ("1", "0", "1")])
        report = evaluate_model(EchoModel(), d, "X1")
        total = sum(sum(c.values()) for c in report.confusion.values())
        assert total == report.n_test


class TestPostprocess:
    def holdout(self):
        # group 0 rows score 0.8, group 1 rows score 0.3 under the tree below
        spec = ([("0", "0", "1")] * 6 + [("0", "0", "0")] * 2
                + [("1", "0", "1")] * 2 + [("1", "0", "0")] * 6)
        return labeled_rows(spec)

    def test_hand_grid(self):
        schema = binary_schema()
        tree = two_leaf_tree(schema, 0.8, 0.3)
        d = self.holdout()
        model = postprocess_thresholds(tree, d, "X1", "dp")
        # brute force over the 4x4 grid {0, 0.3, 0.8, 1} per group
        grid = [0.0, 0.3, 0.8, 1.0]
        best = None
        truth = d.class_column()
        groups = d.column("X1")
        scores = positive_scores(tree, d, "1")
        for ta, tb in itertools.product(grid, repeat=2):
            taus = {"0": ta, "1": tb}
            pred = np.array([s >= taus[g] for s, g in zip(scores, groups)])
            rates = [pred[groups == g].mean() for g in ("0", "1")]
            disparity = abs(rates[0] - rates[1])
            acc = np.mean(np.where(pred, truth == "1", truth != "1"))
            key = (disparity, -acc, ta, tb)
            if best is None or key < best:
                best = key
        got_pred = model.predict_dataset(d) == "1"
        got_rates = [got_pred[groups == g].mean() for g in ("0", "1")]
        assert abs(got_rates[0] - got_rates[1]) == pytest.approx(best[0], abs=1e-12)
        assert (model.thresholds["0"], model.thresholds["1"]) == (best[2], best[3])

    def test_never_increases_disparity(self):
        schema = binary_schema()
        rng = np.random.default_rng(3)
        for _ in range(20):
            tree = two_leaf_tree(schema, float(rng.random()), float(rng.random()))
            spec = [(str(rng.integers(2)), "0", str(rng.integers(2))) for _ in range(40)]
            spec += [("0", "0", "1"), ("1", "0", "1")]  # both groups present
            d = labeled_rows(spec)
            raw = demographic_parity(tree, d, "X1", "1")
            model = postprocess_thresholds(tree, d, "X1", "dp")
            assert demographic_parity(model, d, "X1", "1") <= raw + 1e-12

    def test_constant_score_degenerate(self):
        schema = binary_schema()
        tree = two_leaf_tree(schema, 0.7, 0.7)
        d = self.holdout()
        model = postprocess_thresholds(tree, d, "X1", "dp")
        assert demographic_parity(model, d, "X1", "1") == 0.0

    def test_eop_objective(self):
        schema = binary_schema()
        tree = two_leaf_tree(schema, 0.8, 0.3)
        d = self.holdout()
        model = postprocess_thresholds(tree, d, "X1", "eop")
        assert equal_opportunity(model, d, "X1", "1") <= \
            equal_opportunity(tree, d, "X1", "1") + 1e-12


class TestRelativeGains:
    def test_full_recovery(self):
        assert relative_gain_acc(0.9, 0.6, 0.9).value == 100.0

    def test_no_recovery(self):
        assert relative_gain_acc(0.9, 0.6, 0.6).value == 0.0

    def test_clamped(self):
        g = relative_gain_acc(0.5000001, 0.5, 1.0)
        assert g.value == 100.0 and not g.degenerate

    def test_degenerate(self):
        g = relative_gain_acc(0.7, 0.7, 0.9)
        assert g.value == 0.0 and g.degenerate

    def test_fairness_orientation(self):
        assert relative_gain_fairness(0.1, 0.3, 0.1).value == 100.0
        assert relative_gain_fairness(0.1, 0.3, 0.3).value == 0.0

    def test_domain(self):
        with pytest.raises(DomainError):
            relative_gain_acc(1.2, 0.5, 0.5)

    @settings(max_examples=300)
    @given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
    def test_fuzz_no_division_blowups(self, a, b, c):
        for fn in (relative_gain_acc, relative_gain_fairness):
            g = fn(a, b, c)
            assert -100.0 <= g.value <= 100.0
            if abs(a - b) < 1e-9:
                assert g.degenerate and g.value == 0.0


class TestShiftDiagnostics:
    def test_single_leaf(self):
        schema = binary_schema()
        leaf = Leaf(Distribution(("0", "1"), (0.5, 0.5)), 10, EMPTY_PATH)
        tree = DecisionTree(root=leaf, config=TreeConfig(), schema=schema,
                            x_w=None, diagnostics={})
        d = labeled_rows([("0", "0", "1")] * 10)  # target all positive
        assert tree_shift_distance(tree, d) == pytest.approx(0.5)

    def test_matching_leaves_zero(self):
        schema = binary_schema()
        tree = two_leaf_tree(schema, 1.0, 0.0)
        d = labeled_rows([("0", "0", "1")] * 6 + [("1", "0", "0")] * 4)
        assert tree_shift_distance(tree, d) == 0.0

    def test_two_leaf_hand_sum(self):
        schema = binary_schema()
        tree = two_leaf_tree(schema, 0.9, 0.2)
        d = labeled_rows([("0", "0", "1")] * 6 + [("1", "0", "1")] * 4)
        # leaf X1=0: |0.9-1.0| * 0.6; leaf X1=1: |0.2-1.0| * 0.4
        assert tree_shift_distance(tree, d) == pytest.approx(0.1 * 0.6 + 0.8 * 0.4)

    def test_attribute_report_no_shift(self):
        d = labeled_rows([("0", "1", "1"), ("1", "0", "0")] * 5)
        ks = build_from_target_sample(d, KnowledgeRegime.full())
        rows = attribute_shift_report(d, d, ks)
        for r in rows:
            assert r["w_marginal"] == pytest.approx(0.0, abs=1e-12)
            assert r["w_conditional"] == pytest.approx(0.0, abs=1e-12)

    def test_attribute_report_bernoulli_gap(self):
        src = labeled_rows([("0", "0", "0")] * 7 + [("1", "0", "0")] * 3)
        tgt = labeled_rows([("0", "0", "0")] * 5 + [("1", "0", "0")] * 5)
        rows = attribute_shift_report(src, tgt, None)
        by_name = {r["attribute"]: r for r in rows}
        assert by_name["X1"]["w_marginal"] == pytest.approx(0.2)
        assert by_name["X2"]["w_marginal"] == pytest.approx(0.0)

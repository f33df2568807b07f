"""Reference information-gain tree with no knowledge pipeline anywhere.

This is a deliberately plain reimplementation of top-down IG induction used
to check that the adaptive tree with an empty knowledge store reduces to the
standard algorithm exactly (structure, thresholds, and leaf distributions).
It shares only the numerical kernel, never the adaptive estimation code.
"""

from __future__ import annotations

import numpy as np

from .data import EMPTY_PATH, EQ, LEQ, Dataset, Path, SplitCondition
from .errors import EmptyDataset, UnlabeledData
from .stats import Distribution, class_fractions, freq_fraction, information_gain
from .tree import DecisionTree, Internal, Leaf, TreeConfig

_MIN_GAIN = 1e-12


def _source_dist(rows: Dataset) -> Distribution:
    fracs = class_fractions(rows)
    support = rows.schema.class_values
    return Distribution(support, tuple(fracs[y].numerator / fracs[y].denominator
                                       for y in support))


def _candidates(rows: Dataset) -> list[SplitCondition]:
    out: list[SplitCondition] = []
    for attr in rows.schema.predictive:
        if attr.is_discrete:
            out.extend(SplitCondition(attr.name, EQ, v) for v in attr.domain)
        else:
            vals = np.unique(rows.column(attr.name))
            mids = (vals[:-1] + vals[1:]) / 2.0
            out.extend(SplitCondition(attr.name, LEQ, float(m)) for m in mids)
    return out


def grow_baseline(train: Dataset, config: TreeConfig) -> DecisionTree:
    """Standard IG tree; same stopping rules and tie-breaks as the adaptive grower."""
    if not train.labeled:
        raise UnlabeledData("training data must be labeled")
    if train.n == 0:
        raise EmptyDataset("training data is empty")
    n_train = train.n
    min_rows = config.min_node_fraction * n_train

    def best_split(rows: Dataset):
        parent = _source_dist(rows)
        best = None
        for cond in _candidates(rows):
            mask = cond.matches(rows.column(cond.attribute))
            n_left = int(np.count_nonzero(mask))
            n_right = rows.n - n_left
            if n_left < min_rows or n_right < min_rows or n_left == 0 or n_right == 0:
                continue
            p_left = freq_fraction(rows, cond)
            left = _source_dist(rows.subset(mask))
            right = _source_dist(rows.subset(~mask))
            ig = information_gain(parent, p_left, left, right)
            if best is None or ig > best[1]:
                best = (cond, ig)
        if best is None or best[1] <= _MIN_GAIN:
            return None
        return best

    def build(rows: Dataset, path: Path, depth: int):
        fracs = class_fractions(rows)
        if max(fracs.values()) >= config.purity_stop:
            return Leaf(_source_dist(rows), rows.n, path)
        if depth >= config.max_depth:
            return Leaf(_source_dist(rows), rows.n, path)
        found = best_split(rows)
        if found is None:
            return Leaf(_source_dist(rows), rows.n, path)
        cond, ig = found
        mask = cond.matches(rows.column(cond.attribute))
        return Internal(
            condition=cond,
            left=build(rows.subset(mask), path.extend(cond), depth + 1),
            right=build(rows.subset(~mask), path.extend(cond.negate()), depth + 1),
            ig_achieved=ig,
        )

    root = build(train, EMPTY_PATH, 0)
    return DecisionTree(root=root, config=config, schema=train.schema,
                        x_w=None, diagnostics={})


def trees_equal(a, b) -> bool:
    """Exact structural equality: conditions, gains, and leaf probabilities."""
    if isinstance(a, DecisionTree):
        return trees_equal(a.root, b.root)
    if isinstance(a, Leaf) != isinstance(b, Leaf):
        return False
    if isinstance(a, Leaf):
        return (a.class_dist.support == b.class_dist.support
                and a.class_dist.probs == b.class_dist.probs
                and a.n_source_rows == b.n_source_rows)
    return (a.condition == b.condition
            and a.ig_achieved == b.ig_achieved
            and trees_equal(a.left, b.left)
            and trees_equal(a.right, b.right))

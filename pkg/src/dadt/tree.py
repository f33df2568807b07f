"""Decision-tree induction with optional target-domain probability embedding.

The induction loop is a standard top-down information-gain tree. What makes it
domain-adaptive is where the probabilities feeding the gain formula come from:
split probabilities P(X=t|path) and class distributions P(Y|path) are affine
mixtures of source frequency counts and target-domain knowledge. With an empty
knowledge store every estimate collapses to plain source counting.

Sample-backed estimates are carried as exact fractions, so the collapse to the
source-only tree is bit-for-bit, not merely approximate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .data import (
    EMPTY_PATH,
    EQ,
    LEQ,
    Dataset,
    Path,
    Schema,
    SplitCondition,
)
from .errors import (
    ConfigError,
    EmptyDataset,
    InsufficientKnowledge,
    InternalError,
    UnlabeledData,
    ValueOutOfDomain,
)
from .knowledge import (
    KnowledgeRegime,
    KnowledgeStore,
    affine_estimate,
    dynamic_alpha,
    maximal_subpath,
    query_target,
)
from .stats import (
    Distribution,
    class_fractions,
    freq_fraction,
    information_gain,
    wasserstein,
)

_MIN_GAIN = 1e-12
_MASS_TOL = 1e-9
_N_BINS = 10


@dataclass(frozen=True)
class TreeConfig:
    max_depth: int = 8
    min_node_fraction: float = 0.05
    purity_stop: float = 1.0
    regime: KnowledgeRegime = field(default_factory=KnowledgeRegime.none)
    alpha_override: float | None = None
    x_w_override: str | None = None
    seed: int = 0
    knowledge_at_leaves: bool = True
    route_unseen_right: bool = False

    def __post_init__(self):
        if self.max_depth < 1:
            raise ConfigError("max_depth must be >= 1")
        if not 0.0 < self.min_node_fraction < 1.0:
            raise ConfigError("min_node_fraction must be in (0, 1)")
        if not 0.5 < self.purity_stop <= 1.0:
            raise ConfigError("purity_stop must be in (0.5, 1]")
        if self.alpha_override is not None and not 0.0 <= self.alpha_override <= 1.0:
            raise ConfigError("alpha_override must be in [0, 1]")


@dataclass
class Leaf:
    class_dist: Distribution
    n_source_rows: int
    path: Path


@dataclass
class Internal:
    condition: SplitCondition
    left: "Leaf | Internal"
    right: "Leaf | Internal"
    ig_achieved: float


@dataclass
class DecisionTree:
    root: Leaf | Internal
    config: TreeConfig
    schema: Schema
    x_w: str | None
    diagnostics: dict

    def leaves(self) -> list[Leaf]:
        out: list[Leaf] = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            if isinstance(node, Leaf):
                out.append(node)
            else:
                stack.extend([node.right, node.left])
        return out


def _fraction_dist(schema: Schema, fracs: dict[str, Fraction]) -> Distribution:
    support = schema.class_values
    return Distribution(support, tuple(fracs[y].numerator / fracs[y].denominator
                                       if isinstance(fracs[y], Fraction) else float(fracs[y])
                                       for y in support))


def _split_prob(node_rows: Dataset, cond: SplitCondition, path: Path,
                ks: KnowledgeStore, config: TreeConfig, diagnostics: dict):
    """P(cond | path): source frequency affinely mixed with target knowledge.

    Mixing weight alpha is 1 (source only) when the store cannot answer even
    the marginal, 0 when it answers the full path, and the missing-attribute
    fraction in between; an explicit override replaces the dynamic rule.
    """
    source_p = freq_fraction(node_rows, cond)
    if ks.is_empty:
        return source_p
    sub = maximal_subpath(ks, cond, path)
    if sub is None:
        diagnostics["forced_source"] = diagnostics.get("forced_source", 0) + 1
        return source_p
    target_p = query_target(ks, cond, sub)
    if config.alpha_override is not None:
        alpha = config.alpha_override
    else:
        alpha = dynamic_alpha(path, sub)
    if len(sub) != len(path):
        diagnostics["truncations"] = diagnostics.get("truncations", 0) + 1
    diagnostics.setdefault("alphas", []).append(float(alpha))
    return affine_estimate(source_p, target_p, alpha)


def _class_fracs_subset(node_rows: Dataset, mask: np.ndarray,
                        fallback: dict[str, Fraction]) -> dict[str, Fraction]:
    if not mask.any():
        return fallback
    return class_fractions(node_rows.subset(mask))


def _continuous_bin_edges(values: np.ndarray) -> list[float]:
    qs = np.quantile(values, np.linspace(0.1, 0.9, _N_BINS - 1))
    edges: list[float] = []
    for q in qs:
        f = float(q)
        if not edges or f > edges[-1]:
            edges.append(f)
    return edges


def estimate_class_dist(node_rows: Dataset, path: Path, x_w: str | None,
                        ks: KnowledgeStore, config: TreeConfig,
                        diagnostics: dict | None = None) -> Distribution:
    """Class distribution at a path, reconstructed through the pivot attribute.

    With no knowledge (or no pivot) this is the plain source frequency
    distribution. Otherwise each pivot value x contributes its source class
    conditional weighted by the knowledge-backed estimate of P(X_w=x | path);
    pivot cells with no source rows fall back to the node's own distribution.
    """
    if node_rows.n == 0:
        raise EmptyDataset("cannot estimate a class distribution on an empty node")
    schema = node_rows.schema
    node_fracs = class_fractions(node_rows)
    if ks.is_empty or x_w is None:
        return _fraction_dist(schema, node_fracs)
    if diagnostics is None:
        diagnostics = {}

    attr = schema.attribute(x_w)
    support = schema.class_values
    acc: dict[str, object] = {y: Fraction(0) for y in support}
    col = node_rows.column(x_w)

    if attr.is_discrete:
        cells = [(SplitCondition(x_w, EQ, v), col == v) for v in attr.domain]
        weights = [_split_prob(node_rows, cond, path, ks, config, diagnostics)
                   for cond, _ in cells]
    else:
        pool = ks.sample.column(x_w) if ks.sample is not None else col
        edges = _continuous_bin_edges(np.concatenate([col, pool]))
        cum: list = []
        for e in edges:
            cum.append(_split_prob(node_rows, SplitCondition(x_w, LEQ, e),
                                   path, ks, config, diagnostics))
        weights = []
        prev = Fraction(0)
        for c in cum:
            weights.append(max(c - prev, 0))
            prev = c
        weights.append(max(1 - prev, 0))
        masks = []
        lo = -np.inf
        for e in edges:
            masks.append((col > lo) & (col <= e))
            lo = e
        masks.append(col > lo)
        cells = [(None, m) for m in masks]

    for (_, mask), w in zip(cells, weights):
        fracs = _class_fracs_subset(node_rows, mask, node_fracs)
        for y in support:
            acc[y] = acc[y] + w * fracs[y]

    total = sum(acc.values())
    if abs(total - 1) > _MASS_TOL:
        raise InternalError(f"class mixture mass {float(total)} drifted beyond tolerance")
    probs = []
    for y in support:
        v = acc[y] / total if total != 0 else acc[y]
        if isinstance(v, Fraction):
            probs.append(v.numerator / v.denominator)
        else:
            probs.append(min(max(float(v), 0.0), 1.0))
    return Distribution(support, tuple(probs))


def _candidate_conditions(node_rows: Dataset) -> list[SplitCondition]:
    out: list[SplitCondition] = []
    for attr in node_rows.schema.predictive:
        if attr.is_discrete:
            out.extend(SplitCondition(attr.name, EQ, v) for v in attr.domain)
        else:
            vals = np.unique(node_rows.column(attr.name))
            mids = (vals[:-1] + vals[1:]) / 2.0
            out.extend(SplitCondition(attr.name, LEQ, float(m)) for m in mids)
    return out


def best_split(node_rows: Dataset, path: Path, ks: KnowledgeStore,
               x_w: str | None, config: TreeConfig, n_train: int,
               diagnostics: dict) -> tuple[SplitCondition, float] | None:
    """Maximum-gain candidate, or None when no admissible split improves.

    First strict maximum wins, so ties resolve to schema attribute order and
    then ascending threshold — induction is deterministic without randomness.
    """
    min_rows = config.min_node_fraction * n_train
    parent = estimate_class_dist(node_rows, path, x_w, ks, config, diagnostics)
    best: tuple[SplitCondition, float] | None = None
    for cond in _candidate_conditions(node_rows):
        mask = cond.matches(node_rows.column(cond.attribute))
        n_left = int(np.count_nonzero(mask))
        n_right = node_rows.n - n_left
        if n_left < min_rows or n_right < min_rows or n_left == 0 or n_right == 0:
            continue
        p_left = _split_prob(node_rows, cond, path, ks, config, diagnostics)
        left = estimate_class_dist(node_rows.subset(mask), path.extend(cond),
                                   x_w, ks, config, diagnostics)
        right = estimate_class_dist(node_rows.subset(~mask), path.extend(cond.negate()),
                                    x_w, ks, config, diagnostics)
        ig = information_gain(parent, p_left, left, right)
        if best is None or ig > best[1]:
            best = (cond, ig)
    if best is None or best[1] <= _MIN_GAIN:
        return None
    return best


def select_pivot(source: Dataset, ks: KnowledgeStore) -> str:
    """Attribute whose source/target class conditionals disagree least.

    Scores each predictive attribute by the average Wasserstein distance
    between source and target class conditionals, weighted by the target
    marginal; ties resolve to schema declaration order.
    """
    schema = source.schema
    source_marginal_fracs = class_fractions(source)
    source_marginal = _fraction_dist(schema, source_marginal_fracs)
    best_name: str | None = None
    best_score = float("inf")
    for attr in schema.predictive:
        score = _pivot_score(source, ks, attr, source_marginal)
        if score is None:
            continue
        if score < best_score:
            best_score = score
            best_name = attr.name
    if best_name is None:
        raise InsufficientKnowledge(
            "pivot selection needs target class conditionals or an explicit override")
    return best_name


def _pivot_score(source, ks, attr, source_marginal):
    schema = source.schema
    support = schema.class_values
    col = source.column(attr.name)

    if attr.is_discrete:
        info = (ks.class_conditionals or {}).get(attr.name)
        if info is None:
            return None
        total = 0.0
        for v in attr.domain:
            p_t = info["marginal"].get(v, 0.0)
            tgt = info["y_given_x"].get(v)
            if p_t <= 0.0 or tgt is None:
                continue
            mask = col == v
            if mask.any():
                src = _fraction_dist(schema, class_fractions(source.subset(mask)))
            else:
                src = source_marginal
            total += wasserstein(src, tgt) * p_t
        return total

    if ks.labeled_sample is None:
        return None
    t_col = ks.labeled_sample.column(attr.name)
    t_y = ks.labeled_sample.class_column()
    s_y = source.class_column()
    edges = _continuous_bin_edges(np.concatenate([col, t_col]))
    total = 0.0
    lo = -np.inf
    for e in edges + [np.inf]:
        t_mask = (t_col > lo) & (t_col <= e)
        s_mask = (col > lo) & (col <= e)
        lo = e
        m = int(np.count_nonzero(t_mask))
        if m == 0:
            continue
        p_t = m / len(t_col)
        tgt = Distribution(support, tuple(
            int(np.count_nonzero(t_y[t_mask] == y)) / m for y in support))
        if s_mask.any():
            k = int(np.count_nonzero(s_mask))
            src = Distribution(support, tuple(
                int(np.count_nonzero(s_y[s_mask] == y)) / k for y in support))
        else:
            src = source_marginal
        total += wasserstein(src, tgt) * p_t
    return total


def grow(train_source: Dataset, ks: KnowledgeStore, config: TreeConfig) -> DecisionTree:
    """Top-down induction; stops on purity, depth, node size, or zero gain."""
    if not train_source.labeled:
        raise UnlabeledData("training data must be labeled")
    if train_source.n == 0:
        raise EmptyDataset("training data is empty")
    schema = train_source.schema
    if config.x_w_override is not None:
        schema.attribute(config.x_w_override)
        x_w = config.x_w_override
    elif ks.is_empty:
        x_w = None
    else:
        x_w = select_pivot(train_source, ks)
    diagnostics: dict = {"alphas": [], "truncations": 0, "forced_source": 0}
    n_train = train_source.n
    leaf_ks = ks if config.knowledge_at_leaves else KnowledgeStore.empty(schema)

    def make_leaf(rows: Dataset, path: Path) -> Leaf:
        dist = estimate_class_dist(rows, path, x_w, leaf_ks, config, diagnostics)
        return Leaf(class_dist=dist, n_source_rows=rows.n, path=path)

    def build(rows: Dataset, path: Path, depth: int):
        fracs = class_fractions(rows)
        if max(fracs.values()) >= config.purity_stop:
            return make_leaf(rows, path)
        if depth >= config.max_depth:
            return make_leaf(rows, path)
        found = best_split(rows, path, ks, x_w, config, n_train, diagnostics)
        if found is None:
            return make_leaf(rows, path)
        cond, ig = found
        mask = cond.matches(rows.column(cond.attribute))
        left = build(rows.subset(mask), path.extend(cond), depth + 1)
        right = build(rows.subset(~mask), path.extend(cond.negate()), depth + 1)
        return Internal(condition=cond, left=left, right=right, ig_achieved=ig)

    root = build(train_source, EMPTY_PATH, 0)
    return DecisionTree(root=root, config=config, schema=schema,
                        x_w=x_w, diagnostics=diagnostics)


def predict(tree: DecisionTree, row: dict) -> tuple[str, Distribution]:
    """Route a record to its leaf; returns (majority class, class distribution)."""
    node = tree.root
    while isinstance(node, Internal):
        cond = node.condition
        attr = tree.schema.attribute(cond.attribute)
        value = row[cond.attribute]
        if attr.is_discrete:
            value = str(value)
            if value not in attr.domain:
                if tree.config.route_unseen_right:
                    node = node.right
                    continue
                raise ValueOutOfDomain(
                    f"value {value!r} of {cond.attribute!r} was never declared")
            go_left = (value == cond.threshold) if cond.op == EQ else (value != cond.threshold)
        else:
            v = float(value)
            go_left = (v <= cond.threshold) if cond.op == LEQ else (v > cond.threshold)
        node = node.left if go_left else node.right
    return node.class_dist.argmax(), node.class_dist


def predict_dataset(tree: DecisionTree, d: Dataset) -> np.ndarray:
    """Predicted labels for every row, as an object array."""
    return np.array([predict(tree, row)[0] for row in d.iter_rows()], dtype=object)


def positive_scores(tree: DecisionTree, d: Dataset, positive_label: str) -> np.ndarray:
    """Leaf probability of the positive class for every row."""
    return np.array([predict(tree, row)[1].prob(positive_label)
                     for row in d.iter_rows()], dtype=float)


def _node_to_dict(node) -> dict:
    if isinstance(node, Leaf):
        return {
            "leaf": True,
            "dist": {y: p for y, p in zip(node.class_dist.support, node.class_dist.probs)},
            "n_source_rows": node.n_source_rows,
            "path": [[c.attribute, c.op, c.threshold] for c in node.path.conditions],
        }
    return {
        "leaf": False,
        "condition": {"attr": node.condition.attribute, "op": node.condition.op,
                      "threshold": node.condition.threshold},
        "ig": node.ig_achieved,
        "left": _node_to_dict(node.left),
        "right": _node_to_dict(node.right),
    }


def _node_from_dict(d: dict, schema: Schema):
    if d["leaf"]:
        support = schema.class_values
        dist = Distribution(support, tuple(float(d["dist"][y]) for y in support))
        path = Path(tuple(SplitCondition(a, op, t) for a, op, t in d.get("path", [])))
        return Leaf(class_dist=dist, n_source_rows=int(d["n_source_rows"]), path=path)
    c = d["condition"]
    cond = SplitCondition(c["attr"], c["op"], c["threshold"])
    return Internal(condition=cond,
                    left=_node_from_dict(d["left"], schema),
                    right=_node_from_dict(d["right"], schema),
                    ig_achieved=float(d["ig"]))


def tree_to_json(tree: DecisionTree) -> str:
    cfg = tree.config
    doc = {
        "schema": tree.schema.to_json_dict(),
        "config": {
            "max_depth": cfg.max_depth,
            "min_node_fraction": cfg.min_node_fraction,
            "purity_stop": cfg.purity_stop,
            "regime": {"variant": cfg.regime.variant, "arity": cfg.regime.arity},
            "alpha_override": cfg.alpha_override,
            "x_w_override": cfg.x_w_override,
            "seed": cfg.seed,
            "knowledge_at_leaves": cfg.knowledge_at_leaves,
            "route_unseen_right": cfg.route_unseen_right,
        },
        "x_w": tree.x_w,
        "diagnostics": {
            "truncations": tree.diagnostics.get("truncations", 0),
            "forced_source": tree.diagnostics.get("forced_source", 0),
            "n_alphas": len(tree.diagnostics.get("alphas", [])),
        },
        "root": _node_to_dict(tree.root),
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def tree_from_json(source) -> DecisionTree:
    from .data import schema_from_json
    doc = json.loads(source) if isinstance(source, (str, bytes)) else json.load(source)
    schema = schema_from_json(doc["schema"])
    c = doc["config"]
    regime = KnowledgeRegime(c["regime"]["variant"], c["regime"]["arity"])
    config = TreeConfig(
        max_depth=c["max_depth"], min_node_fraction=c["min_node_fraction"],
        purity_stop=c["purity_stop"], regime=regime,
        alpha_override=c["alpha_override"], x_w_override=c["x_w_override"],
        seed=c["seed"], knowledge_at_leaves=c["knowledge_at_leaves"],
        route_unseen_right=c["route_unseen_right"])
    root = _node_from_dict(doc["root"], schema)
    return DecisionTree(root=root, config=config, schema=schema,
                        x_w=doc.get("x_w"), diagnostics=dict(doc.get("diagnostics", {})))

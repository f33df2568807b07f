"""Target-domain probability knowledge and affine source/target mixing.

A store answers conditional queries P_T(cond | path) either from a retained
unlabeled-equivalent target sample (frequency counting, exact fractions) or
from loaded cross-tables / CDF knots. When the full path is not answerable,
the caller falls back to the maximal answerable subpath plus affine mixing
with the source estimate.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .data import (
    CONTINUOUS,
    DISCRETE,
    EQ,
    GT,
    LEQ,
    NEQ,
    Dataset,
    Path,
    Schema,
    SplitCondition,
    filter_by_path,
)
from .errors import (
    ArityOverflow,
    DomainError,
    EmptyDataset,
    FormatError,
    NormalizationError,
    SubsetViolation,
    UnknownAttribute,
)
from .stats import Distribution, class_fractions, freq_fraction

DEFAULT_CELL_BUDGET = 10**7
_NORM_TOL = 1e-6


@dataclass(frozen=True)
class KnowledgeRegime:
    variant: str  # "none" | "full" | "partial"
    arity: int | None = None

    def __post_init__(self):
        if self.variant not in ("none", "full", "partial"):
            raise ValueError(f"unknown regime {self.variant!r}")
        if self.variant == "partial" and (self.arity is None or self.arity < 1):
            raise ValueError("partial knowledge needs arity >= 1")

    @staticmethod
    def none() -> "KnowledgeRegime":
        return KnowledgeRegime("none")

    @staticmethod
    def full() -> "KnowledgeRegime":
        return KnowledgeRegime("full")

    @staticmethod
    def partial(k: int) -> "KnowledgeRegime":
        return KnowledgeRegime("partial", k)

    @property
    def is_none(self) -> bool:
        return self.variant == "none"


@dataclass
class CdfEntry:
    var: str
    context: frozenset  # of (attribute, value) pairs
    knots: tuple[tuple[float, float], ...]  # (value, cumulative prob), sorted

    def evaluate(self, t: float, interpolate: bool) -> float:
        vals = [v for v, _ in self.knots]
        ps = [p for _, p in self.knots]
        if t < vals[0]:
            return 0.0 if not interpolate else ps[0] if t == vals[0] else 0.0
        if t >= vals[-1]:
            return ps[-1]
        import bisect
        i = bisect.bisect_right(vals, t) - 1
        if not interpolate or vals[i] == t:
            return ps[i]
        v0, v1 = vals[i], vals[i + 1]
        p0, p1 = ps[i], ps[i + 1]
        return p0 + (p1 - p0) * (t - v0) / (v1 - v0)


@dataclass
class KnowledgeStore:
    schema: Schema
    arity_limit: float  # math.inf for full knowledge, 0 for none
    sample: Dataset | None = None
    labeled_sample: Dataset | None = None  # class info; used only for pivot selection
    tables: dict[tuple[str, ...], dict[tuple, float]] = field(default_factory=dict)
    cdfs: list[CdfEntry] = field(default_factory=list)
    class_conditionals: dict[str, dict] | None = None
    class_marginal: Distribution | None = None
    interpolate_cdfs: bool = False
    _path_cache: dict = field(default_factory=dict, repr=False)

    @property
    def is_empty(self) -> bool:
        return (self.sample is None and not self.tables and not self.cdfs)

    @staticmethod
    def empty(schema: Schema) -> "KnowledgeStore":
        return KnowledgeStore(schema=schema, arity_limit=0)

    def _filtered(self, path: Path) -> Dataset:
        key = path.conditions
        hit = self._path_cache.get(key)
        if hit is None:
            hit = filter_by_path(self.sample, path)
            self._path_cache[key] = hit
        return hit


def build_from_target_sample(target: Dataset, regime: KnowledgeRegime,
                             cell_budget: int = DEFAULT_CELL_BUDGET) -> KnowledgeStore:
    """Knowledge from a target-domain sample.

    Full knowledge retains the sample and answers arbitrary paths by counting;
    partial knowledge additionally precomputes discrete cross-tables of arity
    <= k and refuses to answer queries that would need more attributes.
    """
    if regime.is_none:
        return KnowledgeStore.empty(target.schema)
    if target.n == 0:
        raise EmptyDataset("cannot build knowledge from an empty sample")
    schema = target.schema
    arity = math.inf if regime.variant == "full" else float(regime.arity)
    store = KnowledgeStore(
        schema=schema,
        arity_limit=arity,
        sample=target.without_labels(),
        labeled_sample=target if target.labeled else None,
    )
    if regime.variant == "partial":
        store.tables = _precompute_crosstabs(target, regime.arity, cell_budget)
    if target.labeled:
        store.class_conditionals = _class_conditionals_from_sample(target)
        fracs = class_fractions(target)
        store.class_marginal = Distribution(
            schema.class_values,
            tuple(fracs[y].numerator / fracs[y].denominator for y in schema.class_values))
    return store


def _precompute_crosstabs(target: Dataset, k: int, cell_budget: int) -> dict:
    discrete = [a for a in target.schema.predictive if a.is_discrete]
    tables: dict[tuple[str, ...], dict[tuple, float]] = {}
    n = target.n
    for size in range(1, k + 1):
        for combo in itertools.combinations(discrete, size):
            cells = 1
            for a in combo:
                cells *= len(a.domain)
            if cells > cell_budget:
                names = tuple(a.name for a in combo)
                raise ArityOverflow(
                    f"cross-table over {names} needs {cells} cells (budget {cell_budget})")
            names = tuple(a.name for a in combo)
            cols = [target.column(a.name) for a in combo]
            table: dict[tuple, float] = {}
            for key in itertools.product(*(a.domain for a in combo)):
                mask = np.ones(n, dtype=bool)
                for col, v in zip(cols, key):
                    mask &= col == v
                table[key] = int(np.count_nonzero(mask)) / n
            tables[names] = table
    return tables


def _class_conditionals_from_sample(target: Dataset) -> dict[str, dict]:
    out: dict[str, dict] = {}
    y_col = target.class_column()
    class_values = target.schema.class_values
    n = target.n
    for attr in target.schema.predictive:
        if not attr.is_discrete:
            continue  # continuous pivots are scored from the retained sample
        col = target.column(attr.name)
        marginal: dict[str, float] = {}
        y_given_x: dict[str, Distribution] = {}
        for v in attr.domain:
            mask = col == v
            m = int(np.count_nonzero(mask))
            marginal[v] = m / n
            if m > 0:
                sub = y_col[mask]
                y_given_x[v] = Distribution(
                    class_values,
                    tuple(int(np.count_nonzero(sub == y)) / m for y in class_values))
        out[attr.name] = {"marginal": marginal, "y_given_x": y_given_x}
    return out


def load_from_crosstabs(json_source, schema: Schema) -> KnowledgeStore:
    """Knowledge from a cross-tab/CDF JSON document (official-statistics style)."""
    if isinstance(json_source, bytes):
        doc = json.loads(json_source.decode("utf-8"))
    elif isinstance(json_source, str):
        doc = json.loads(json_source)
    elif isinstance(json_source, dict):
        doc = json_source
    else:
        doc = json.load(json_source)
    if not isinstance(doc, dict):
        raise FormatError("cross-tab document must be a JSON object")

    arity = doc.get("arity_limit")
    tables: dict[tuple[str, ...], dict[tuple, float]] = {}
    for spec in doc.get("tables", []):
        try:
            names = tuple(spec["vars"])
            cells = spec["cells"]
        except (KeyError, TypeError) as exc:
            raise FormatError(f"malformed table entry: {exc}") from exc
        attrs = []
        for name in names:
            attr = schema.attribute(name)
            if not attr.is_discrete:
                raise FormatError(f"cross-table variable {name!r} must be discrete")
            attrs.append(attr)
        table: dict[tuple, float] = {}
        for cell in cells:
            try:
                key = tuple(str(v) for v in cell["key"])
                p = float(cell["p"])
            except (KeyError, TypeError, ValueError) as exc:
                raise FormatError(f"malformed cell in table {names}: {exc}") from exc
            if len(key) != len(names):
                raise FormatError(f"cell key {key} has wrong length for {names}")
            for v, attr in zip(key, attrs):
                if v not in attr.domain:
                    raise FormatError(f"value {v!r} not in domain of {attr.name!r}")
            if p < 0:
                raise FormatError(f"negative probability in table {names}")
            table[key] = table.get(key, 0.0) + p
        total = sum(table.values())
        if abs(total - 1.0) > _NORM_TOL:
            raise NormalizationError(f"table {names} sums to {total}")
        tables[names] = {k: v / total for k, v in table.items()}

    cdfs: list[CdfEntry] = []
    for spec in doc.get("cdfs", []):
        try:
            var = spec["var"]
            knots = [(float(v), float(p)) for v, p in spec["knots"]]
            context = frozenset((a, str(v)) for a, v in spec.get("context", []))
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed cdf entry: {exc}") from exc
        attr = schema.attribute(var)
        if attr.is_discrete:
            raise FormatError(f"cdf variable {var!r} must be continuous")
        if not knots:
            raise FormatError(f"cdf for {var!r} has no knots")
        knots.sort()
        ps = [p for _, p in knots]
        if any(b < a for a, b in zip(ps, ps[1:])) or ps[0] < 0:
            raise FormatError(f"cdf for {var!r} is not nondecreasing")
        if abs(ps[-1] - 1.0) > _NORM_TOL:
            raise NormalizationError(f"cdf for {var!r} ends at {ps[-1]}")
        scale = ps[-1]
        cdfs.append(CdfEntry(var=var, context=context,
                             knots=tuple((v, p / scale) for v, p in knots)))

    class_cond = None
    if "class_conditionals" in doc and doc["class_conditionals"]:
        class_cond = {}
        for spec in doc["class_conditionals"]:
            var = spec["var"]
            schema.attribute(var)
            y_given_x = {
                str(x): _class_dist_from_dict(schema, dist)
                for x, dist in spec["y_given_x"].items()
            }
            marginal = {str(x): float(p) for x, p in spec["marginal"].items()}
            class_cond[var] = {"marginal": marginal, "y_given_x": y_given_x}

    class_marginal = None
    if doc.get("class_marginal"):
        class_marginal = _class_dist_from_dict(schema, doc["class_marginal"])

    if arity is None:
        # unspecified: stored tables/CDFs already bound what is answerable
        arity = math.inf
    return KnowledgeStore(
        schema=schema,
        arity_limit=float(arity),
        tables=tables,
        cdfs=cdfs,
        class_conditionals=class_cond,
        class_marginal=class_marginal,
        interpolate_cdfs=True,
    )


def _class_dist_from_dict(schema: Schema, d: dict) -> Distribution:
    support = schema.class_values
    probs = [float(d.get(y, 0.0)) for y in support]
    total = sum(probs)
    if abs(total - 1.0) > _NORM_TOL:
        raise NormalizationError(f"class distribution sums to {total}")
    return Distribution(support, tuple(p / total for p in probs))


def _check_attrs(ks: KnowledgeStore, cond: SplitCondition, path: Path) -> set[str]:
    names = set(ks.schema.predictive_names)
    attrs = {cond.attribute} | set(path.attributes())
    for a in attrs:
        if a not in names:
            raise UnknownAttribute(f"{a!r} is not a predictive attribute")
    return attrs


def query_target(ks: KnowledgeStore, cond: SplitCondition, path: Path):
    """P_T(cond | path) if answerable by the store, else None.

    Sample-backed stores count frequencies (exact fractions); cross-tab stores
    marginalize joint cells, and continuous conditions evaluate stored CDFs.
    Zero-mass conditioning contexts are unavailable, never divided by.
    """
    if ks.is_empty:
        return None
    attrs = _check_attrs(ks, cond, path)
    if len(attrs) > ks.arity_limit:
        return None

    if ks.sample is not None:
        sub = ks._filtered(path)
        if sub.n == 0:
            return None
        return freq_fraction(sub, cond)

    attr = ks.schema.attribute(cond.attribute)
    if attr.is_discrete:
        return _query_tables(ks, cond, path)
    return _query_cdfs(ks, cond, path)


def _query_tables(ks: KnowledgeStore, cond: SplitCondition, path: Path):
    for c in path.conditions:
        if not ks.schema.attribute(c.attribute).is_discrete:
            return None  # tables cannot condition on continuous thresholds
    needed = {cond.attribute} | set(path.attributes())
    candidates = [names for names in ks.tables if needed <= set(names)]
    if not candidates:
        return None
    names = min(candidates, key=len)
    table = ks.tables[names]
    num = 0.0
    den = 0.0
    for key, p in table.items():
        assignment = dict(zip(names, key))
        if all(_cell_satisfies(c, assignment) for c in path.conditions):
            den += p
            if _cell_satisfies(cond, assignment):
                num += p
    if den <= 0.0:
        return None
    return num / den


def _cell_satisfies(cond: SplitCondition, assignment: dict) -> bool:
    v = assignment[cond.attribute]
    if cond.op == EQ:
        return v == cond.threshold
    if cond.op == NEQ:
        return v != cond.threshold
    raise DomainError(f"op {cond.op!r} not valid on discrete cells")


def _query_cdfs(ks: KnowledgeStore, cond: SplitCondition, path: Path):
    if cond.op not in (LEQ, GT):
        return None
    context = set()
    for c in path.conditions:
        if c.op != EQ:
            return None  # CDF contexts are equality conditions only
        context.add((c.attribute, c.threshold))
    for entry in ks.cdfs:
        if entry.var == cond.attribute and entry.context == frozenset(context):
            p = entry.evaluate(float(cond.threshold), ks.interpolate_cdfs)
            return p if cond.op == LEQ else 1.0 - p
    return None


def maximal_subpath(ks: KnowledgeStore, cond: SplitCondition, path: Path) -> Path | None:
    """Largest answerable prefix of the path's distinct attributes.

    Prefixes are taken in root order; the candidate set shrinks until the
    store can answer (arity within limit and non-zero conditioning mass).
    Returns None when not even the marginal is answerable (use source only).
    """
    if ks.is_empty:
        return None
    _check_attrs(ks, cond, path)
    order = path.attributes()
    for j in range(len(order), -1, -1):
        allowed = set(order[:j])
        sub = Path(tuple(c for c in path.conditions if c.attribute in allowed))
        if len({cond.attribute} | allowed) > ks.arity_limit:
            continue
        if query_target(ks, cond, sub) is not None:
            return sub
    return None


def dynamic_alpha(path: Path, subpath: Path) -> Fraction:
    """Proportion of the path's distinct attributes missing from the subpath."""
    sub_conds = set(subpath.conditions)
    if not sub_conds <= set(path.conditions):
        raise SubsetViolation("subpath conditions must be a subset of the path's")
    attrs = set(path.attributes())
    if not attrs:
        return Fraction(0)
    missing = attrs - set(subpath.attributes())
    return Fraction(len(missing), len(attrs))


def affine_estimate(source_p, target_p, alpha):
    """alpha * source + (1 - alpha) * target; alpha=1 is source-only."""
    for name, v in (("source_p", source_p), ("target_p", target_p), ("alpha", alpha)):
        if not 0 <= v <= 1:
            raise DomainError(f"{name}={v} outside [0, 1]")
    mixed = alpha * source_p + (1 - alpha) * target_p
    if isinstance(mixed, Fraction):
        return mixed
    if -1e-12 <= mixed < 0.0:
        return 0.0
    if 1.0 < mixed <= 1.0 + 1e-12:
        return 1.0
    return mixed

"""Conjunctive queries over the knowledge graph.

Grammar: ``predicate (AND predicate)*`` with predicates

* ``has(ID)``   - recipe uses exactly this ingredient id
* ``has~(ID)``  - recipe uses any concrete descendant of the id
* ``kcal<300``, ``protein>=20`` ... - nutrient comparisons (``< <= > >= =``)
* ``region=JP`` - recipe carries a region tag with this code

The empty query matches everything. Recipes whose nutrient values are not
fully covered by the table are excluded from nutrient-range matches and
listed in a side report instead of being guessed at.

Evaluation is read-only over a store snapshot; concurrent evaluations are
fine.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import InconsistentResultError, QuerySyntaxError, UnknownNutrientKeyError
from .nutrition import Basis, NutrientProfile, NutrientTable, derive_recipe_profile, per_serving
from .ontology import OntologyGraph
from .store import GraphStore, Recipe, RegionRelation, SubgraphDoc

# Short nutrient aliases accepted (and produced) by the query grammar.
KEY_ALIASES = {
    "kcal": "energy_kcal",
    "protein": "protein_g",
    "fat": "fat_g",
    "carbohydrate": "carbohydrate_g",
}
_REVERSE_ALIASES = {v: k for k, v in KEY_ALIASES.items()}


@dataclass(frozen=True)
class Has:
    ingredient_id: str
    expand: bool = False


@dataclass(frozen=True)
class NutrientRange:
    key: str
    min: float | None = None
    max: float | None = None
    min_strict: bool = False
    max_strict: bool = False
    basis: Basis = Basis.PER_RECIPE

    def __post_init__(self):
        if self.min is None and self.max is None:
            raise ValueError("NutrientRange needs at least one bound")

    def matches(self, amount: float) -> bool:
        if self.min is not None:
            if amount < self.min or (self.min_strict and amount == self.min):
                return False
        if self.max is not None:
            if amount > self.max or (self.max_strict and amount == self.max):
                return False
        return True


@dataclass(frozen=True)
class Region:
    code: str
    relation: RegionRelation | None = None  # None matches any relation


Predicate = Has | NutrientRange | Region


@dataclass(frozen=True)
class QueryAST:
    terms: tuple[Predicate, ...] = ()


_HAS_RE = re.compile(r"has(~?)\(([^)]+)\)$")
_CMP_RE = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)(<=|>=|<|>|=)(.*)$")
_NUMBER_RE = re.compile(r"^-?\d+(\.\d+)?$")


def parse_query(text: str) -> QueryAST:
    """Parse the conjunctive grammar; syntax errors carry a character position."""
    stripped = text.strip()
    if not stripped:
        return QueryAST()
    terms: list[Predicate] = []
    pos = 0
    expect_predicate = True
    # walk whitespace-separated tokens, tracking offsets for error positions
    for match in re.finditer(r"\S+", text):
        token, start = match.group(), match.start()
        if not expect_predicate:
            if token != "AND":
                raise QuerySyntaxError(f"expected AND, got {token!r}", start)
            expect_predicate = True
            continue
        terms.append(_parse_predicate(token, start))
        expect_predicate = False
        pos = match.end()
    if expect_predicate:
        raise QuerySyntaxError("dangling AND: predicate expected", len(text))
    del pos
    return QueryAST(tuple(terms))


def _parse_predicate(token: str, start: int) -> Predicate:
    m = _HAS_RE.match(token)
    if m:
        ingredient = m.group(2).strip()
        if not ingredient:
            raise QuerySyntaxError("empty ingredient id in has()", start + token.index("(") + 1)
        return Has(ingredient, expand=bool(m.group(1)))
    if token.startswith("has"):
        raise QuerySyntaxError(f"malformed has predicate {token!r}", start)
    m = _CMP_RE.match(token)
    if not m:
        raise QuerySyntaxError(f"unknown predicate {token!r}", start)
    name, op, value = m.group(1), m.group(2), m.group(3)
    value_pos = start + len(name) + len(op)
    if name == "region":
        if op != "=":
            raise QuerySyntaxError("region only supports '='", start + len(name))
        if not value or not value.isupper():
            raise QuerySyntaxError(
                f"region code must be non-empty uppercase, got {value!r}", value_pos
            )
        return Region(value)
    if not value or not _NUMBER_RE.match(value):
        raise QuerySyntaxError(f"malformed number {value!r}", value_pos)
    number = float(value)
    key = KEY_ALIASES.get(name, name)
    if op == "<":
        return NutrientRange(key, max=number, max_strict=True)
    if op == "<=":
        return NutrientRange(key, max=number)
    if op == ">":
        return NutrientRange(key, min=number, min_strict=True)
    if op == ">=":
        return NutrientRange(key, min=number)
    return NutrientRange(key, min=number, max=number)


def _format_number(value: float) -> str:
    return str(int(value)) if value == int(value) else repr(value)


def render_query(ast: QueryAST) -> str:
    """Canonical text for an AST; ``parse_query(render_query(a)) == a``.

    Raises ValueError for ASTs the grammar cannot express (relation-bearing
    region predicates, double-bounded ranges that are not equalities,
    non-default bases).
    """
    parts = []
    for term in ast.terms:
        if isinstance(term, Has):
            parts.append(f"has{'~' if term.expand else ''}({term.ingredient_id})")
        elif isinstance(term, Region):
            if term.relation is not None:
                raise ValueError("grammar cannot express a region relation")
            parts.append(f"region={term.code}")
        else:
            if term.basis is not Basis.PER_RECIPE:
                raise ValueError("grammar cannot express a basis")
            key = _REVERSE_ALIASES.get(term.key, term.key)
            if term.min is not None and term.max is not None:
                if term.min != term.max or term.min_strict or term.max_strict:
                    raise ValueError("grammar cannot express a double-bounded range")
                parts.append(f"{key}={_format_number(term.min)}")
            elif term.min is not None:
                op = ">" if term.min_strict else ">="
                parts.append(f"{key}{op}{_format_number(term.min)}")
            else:
                op = "<" if term.max_strict else "<="
                parts.append(f"{key}{op}{_format_number(term.max)}")  # type: ignore[arg-type]
    return " AND ".join(parts)


class ProfileIndex:
    """Lazy cache of derived per-recipe profiles, keyed to the store version."""

    def __init__(self, store: GraphStore, table: NutrientTable):
        self.store = store
        self.table = table
        self._cache: dict[str, tuple[int, NutrientProfile]] = {}

    def per_recipe(self, recipe: Recipe) -> NutrientProfile:
        cached = self._cache.get(recipe.id)
        version = self.store.version(recipe.id)
        if cached is not None and cached[0] == version:
            return cached[1]
        profile = derive_recipe_profile(recipe, self.table)
        self._cache[recipe.id] = (version, profile)
        return profile

    def on_basis(self, recipe: Recipe, basis: Basis) -> NutrientProfile:
        profile = self.per_recipe(recipe)
        if basis is Basis.PER_SERVING:
            return per_serving(profile, recipe.servings)
        return profile


@dataclass(frozen=True)
class QueryResult:
    ids: frozenset[str]
    # nutrient key -> recipe ids excluded because coverage was incomplete
    uncovered: dict[str, tuple[str, ...]] = field(default_factory=dict)


def eval_query(
    ast: QueryAST,
    store: GraphStore,
    table: NutrientTable | None = None,
    profiles: ProfileIndex | None = None,
) -> QueryResult:
    """Intersection of per-predicate result sets over the store.

    Unknown ingredient ids raise; unknown nutrient keys (absent from the
    table's key space) raise UnknownNutrientKeyError. Recipes with unknown
    nutrient values never match a range; they are reported in ``uncovered``.
    """
    ids = frozenset(store.recipe_ids())
    uncovered: dict[str, tuple[str, ...]] = {}
    if not ast.terms:
        return QueryResult(ids)
    if profiles is None and table is not None:
        profiles = ProfileIndex(store, table)
    for term in ast.terms:
        if isinstance(term, Has):
            matched = frozenset(store.recipes_containing(term.ingredient_id, term.expand))
            ids &= matched
        elif isinstance(term, Region):
            ids = frozenset(
                rid
                for rid in ids
                if any(
                    t.region_code == term.code
                    and (term.relation is None or t.relation == term.relation)
                    for t in store.get(rid).regions
                )
            )
        else:
            if profiles is None:
                raise UnknownNutrientKeyError(
                    "nutrient predicates need a nutrient table"
                )
            if term.key not in profiles.table.keys:
                raise UnknownNutrientKeyError(f"unknown nutrient key {term.key!r}")
            matched = set()
            excluded = []
            for rid in sorted(ids):
                profile = profiles.on_basis(store.get(rid), term.basis)
                if not profile.covered(term.key):
                    excluded.append(rid)
                elif term.matches(profile.amounts[term.key]):
                    matched.add(rid)
            if excluded:
                prev = uncovered.get(term.key, ())
                uncovered[term.key] = tuple(sorted(set(prev) | set(excluded)))
            ids = frozenset(matched)
    return QueryResult(ids, uncovered)


def explain(
    ast: QueryAST,
    result_ids: set[str] | frozenset[str],
    store: GraphStore,
    table: NutrientTable | None = None,
) -> SubgraphDoc:
    """Subgraph of the result recipes with the ingredient nodes that
    satisfied the containment predicates marked."""
    full = eval_query(ast, store, table)
    if not set(result_ids) <= set(full.ids):
        extra = sorted(set(result_ids) - set(full.ids))
        raise InconsistentResultError(
            f"result set contains non-matching recipes: {extra!r}"
        )
    ontology = store.ontology
    used: set[str] = set()
    for rid in result_ids:
        used |= store.get(rid).ingredient_ids()
    marked: set[str] = set()
    for term in ast.terms:
        if not isinstance(term, Has):
            continue
        if term.expand:
            marked |= ontology.descendants(term.ingredient_id) & used
            if term.ingredient_id in used:
                marked.add(term.ingredient_id)
        elif term.ingredient_id in used:
            marked.add(term.ingredient_id)
    return store.export_subgraph(set(result_ids), marked=marked)

"""Materialized food knowledge graph: recipes wired to ontology nodes.

Recipe -> ingredient edges carry the portion (grams) and the step the
ingredient participates in. The store keeps two containment indices: one for
exact ingredient ids and one propagated to every ancestor, so class-level
queries (has~) are a single lookup.

Writes serialize behind a lock; every read takes the same lock briefly, so
readers always observe a consistent version (single-writer / multi-reader).
"""

from __future__ import annotations

import enum
import json
import threading
import uuid
from dataclasses import dataclass, field, replace

from .errors import RecipeInvalidError, UnknownIngredientError, UnknownRecipeError
from .ontology import OntologyGraph


class Unit(enum.Enum):
    GRAM = "gram"
    MILLILITER = "milliliter"
    CUP = "cup"
    TABLESPOON = "tablespoon"
    TEASPOON = "teaspoon"
    PIECE = "piece"
    UNITLESS = "unitless"


class RegionRelation(enum.Enum):
    ORIGIN = "origin"
    AVAILABLE = "available"
    POPULAR = "popular"


@dataclass(frozen=True)
class RegionTag:
    region_code: str  # ISO-3166-like, uppercase
    relation: RegionRelation


@dataclass(frozen=True)
class IngredientUse:
    """Edge from a recipe to a concrete ingredient node."""

    ingredient_id: str
    quantity: float
    unit: Unit
    grams: float  # resolved mass; >= 0
    step_index: int  # 0-based index into the recipe's steps
    process: str  # verb, e.g. "fry"


@dataclass(frozen=True)
class Step:
    text: str
    process: str
    refs: tuple[str, ...] = ()  # ingredient ids mentioned by this step


@dataclass(frozen=True)
class Lineage:
    parent_id: str
    script_id: str


@dataclass(frozen=True)
class Recipe:
    id: str
    title: str
    servings: int
    uses: tuple[IngredientUse, ...]
    steps: tuple[Step, ...]
    regions: frozenset[RegionTag] = frozenset()
    lineage: Lineage | None = None

    def ingredient_ids(self) -> set[str]:
        return {u.ingredient_id for u in self.uses}

    def use_of(self, ingredient_id: str) -> IngredientUse | None:
        for u in self.uses:
            if u.ingredient_id == ingredient_id:
                return u
        return None


def validate_recipe(recipe: Recipe, ontology: OntologyGraph | None = None) -> None:
    """Check the structural invariants; with an ontology, also the edges.

    Raises :class:`RecipeInvalidError` / :class:`UnknownIngredientError`.
    """
    if not recipe.id:
        raise RecipeInvalidError("recipe id must be non-empty", field="id")
    if recipe.servings < 1:
        raise RecipeInvalidError(
            f"servings must be >= 1, got {recipe.servings}", field="servings"
        )
    if not recipe.uses:
        raise RecipeInvalidError("recipe needs at least one ingredient use", field="uses")
    if not recipe.steps:
        raise RecipeInvalidError("recipe needs at least one step", field="steps")
    use_ids = recipe.ingredient_ids()
    if len(use_ids) != len(recipe.uses):
        dupes = sorted(
            {u.ingredient_id for i, u in enumerate(recipe.uses)
             if u.ingredient_id in {v.ingredient_id for v in recipe.uses[:i]}}
        )
        raise RecipeInvalidError(f"duplicate ingredient uses: {dupes!r}", field="uses")
    for i, use in enumerate(recipe.uses):
        if use.grams < 0:
            raise RecipeInvalidError(
                f"use[{i}] grams must be >= 0", field=f"uses[{i}].grams"
            )
        if use.quantity < 0:
            raise RecipeInvalidError(
                f"use[{i}] quantity must be >= 0", field=f"uses[{i}].quantity"
            )
        if not (0 <= use.step_index < len(recipe.steps)):
            raise RecipeInvalidError(
                f"use[{i}] step_index {use.step_index} out of range",
                field=f"uses[{i}].step_index",
            )
    for i, step in enumerate(recipe.steps):
        for ref in step.refs:
            if ref not in use_ids:
                raise RecipeInvalidError(
                    f"step[{i}] references {ref!r} which is not among the uses",
                    field=f"steps[{i}].refs",
                )
    for tag in recipe.regions:
        if not tag.region_code or tag.region_code != tag.region_code.upper():
            raise RecipeInvalidError(
                f"region code {tag.region_code!r} must be non-empty uppercase",
                field="regions",
            )
    if ontology is not None:
        for use in recipe.uses:
            if use.ingredient_id not in ontology:
                raise UnknownIngredientError(
                    f"unknown ingredient id {use.ingredient_id!r}",
                    field="uses",
                )
            if not ontology.is_concrete(use.ingredient_id):
                raise RecipeInvalidError(
                    f"ingredient {use.ingredient_id!r} is an abstract class; "
                    f"uses must reference concrete nodes",
                    field="uses",
                )


class GraphStore:
    """In-memory recipe store with hierarchical containment indices."""

    def __init__(self, ontology: OntologyGraph):
        self._ontology = ontology
        self._recipes: dict[str, Recipe] = {}
        self._versions: dict[str, int] = {}
        self._exact: dict[str, set[str]] = {}
        self._expanded: dict[str, set[str]] = {}
        self._lock = threading.RLock()
        self.mutation_count = 0

    @property
    def ontology(self) -> OntologyGraph:
        return self._ontology

    def __len__(self) -> int:
        with self._lock:
            return len(self._recipes)

    def recipe_ids(self) -> list[str]:
        with self._lock:
            return sorted(self._recipes)

    def get(self, recipe_id: str) -> Recipe:
        with self._lock:
            try:
                return self._recipes[recipe_id]
            except KeyError:
                raise UnknownRecipeError(f"unknown recipe id {recipe_id!r}") from None

    def version(self, recipe_id: str) -> int:
        with self._lock:
            self.get(recipe_id)
            return self._versions[recipe_id]

    def upsert_recipe(self, recipe: Recipe) -> str:
        """Validate and store a recipe, updating the containment indices.

        A missing id gets a generated UUID. Re-upserting an existing id
        replaces it (the indices drop the old edges first) and bumps its
        version counter.
        """
        if not recipe.id:
            recipe = replace(recipe, id=str(uuid.uuid4()))
        validate_recipe(recipe, self._ontology)
        with self._lock:
            if recipe.id in self._recipes:
                self._unindex(self._recipes[recipe.id])
            self._recipes[recipe.id] = recipe
            self._versions[recipe.id] = self._versions.get(recipe.id, 0) + 1
            self._index(recipe)
            self.mutation_count += 1
        return recipe.id

    def delete_recipe(self, recipe_id: str) -> None:
        with self._lock:
            recipe = self.get(recipe_id)
            self._unindex(recipe)
            del self._recipes[recipe_id]
            del self._versions[recipe_id]
            self.mutation_count += 1

    def _index(self, recipe: Recipe) -> None:
        for ing in recipe.ingredient_ids():
            self._exact.setdefault(ing, set()).add(recipe.id)
            self._expanded.setdefault(ing, set()).add(recipe.id)
            for anc in self._ontology.ancestors(ing):
                self._expanded.setdefault(anc, set()).add(recipe.id)

    def _unindex(self, recipe: Recipe) -> None:
        for ing in recipe.ingredient_ids():
            self._exact.get(ing, set()).discard(recipe.id)
            self._expanded.get(ing, set()).discard(recipe.id)
            for anc in self._ontology.ancestors(ing):
                self._expanded.get(anc, set()).discard(recipe.id)

    def recipes_containing(self, ingredient_id: str, expand: bool = False) -> set[str]:
        """Recipe ids using the ingredient; with ``expand``, any concrete
        descendant of it counts."""
        self._ontology.node(ingredient_id)  # raises UnknownNodeError
        with self._lock:
            index = self._expanded if expand else self._exact
            return set(index.get(ingredient_id, set()))

    def export_subgraph(
        self, recipe_ids: set[str] | list[str], marked: set[str] | None = None
    ) -> "SubgraphDoc":
        """Neighborhood view: the given recipes, their ingredients, and the
        use edges between them. Node order is sorted by id, so the export is
        byte-stable on an unchanged store."""
        marked = marked or set()
        with self._lock:
            recipes = [self.get(rid) for rid in sorted(set(recipe_ids))]
        nodes: list[SubgraphNode] = []
        edges: list[SubgraphEdge] = []
        ingredient_ids: set[str] = set()
        for r in recipes:
            for use in r.uses:
                ingredient_ids.add(use.ingredient_id)
                edges.append(
                    SubgraphEdge(
                        recipe_id=r.id,
                        ingredient_id=use.ingredient_id,
                        grams=use.grams,
                        step_index=use.step_index,
                        process=use.process,
                    )
                )
        for r in recipes:
            nodes.append(SubgraphNode(r.id, "recipe", r.title, r.id in marked))
        for ing in sorted(ingredient_ids):
            nodes.append(
                SubgraphNode(ing, "ingredient", self._ontology.node(ing).name, ing in marked)
            )
        nodes.sort(key=lambda n: n.id)
        edges.sort(key=lambda e: (e.recipe_id, e.ingredient_id))
        return SubgraphDoc(tuple(nodes), tuple(edges))


@dataclass(frozen=True)
class SubgraphNode:
    id: str
    kind: str  # "recipe" | "ingredient"
    label: str
    marked: bool = False


@dataclass(frozen=True)
class SubgraphEdge:
    recipe_id: str
    ingredient_id: str
    grams: float
    step_index: int
    process: str


@dataclass(frozen=True)
class SubgraphDoc:
    nodes: tuple[SubgraphNode, ...]
    edges: tuple[SubgraphEdge, ...]

    def to_dict(self) -> dict:
        return {
            "nodes": [
                {"id": n.id, "kind": n.kind, "label": n.label, "marked": n.marked}
                for n in self.nodes
            ],
            "edges": [
                {
                    "recipe_id": e.recipe_id,
                    "ingredient_id": e.ingredient_id,
                    "grams": e.grams,
                    "step_index": e.step_index,
                    "process": e.process,
                }
                for e in self.edges
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_dot(self) -> str:
        """DOT-compatible rendering (recipes as boxes, ingredients as ellipses)."""
        lines = ["digraph food_subgraph {"]
        for n in self.nodes:
            shape = "box" if n.kind == "recipe" else "ellipse"
            attrs = f'label="{_dot_escape(n.label)}", shape={shape}'
            if n.marked:
                attrs += ", style=filled, fillcolor=gold"
            lines.append(f'  "{_dot_escape(n.id)}" [{attrs}];')
        for e in self.edges:
            lines.append(
                f'  "{_dot_escape(e.recipe_id)}" -> "{_dot_escape(e.ingredient_id)}"'
                f' [label="{e.grams:g} g / step {e.step_index}"];'
            )
        lines.append("}")
        return "\n".join(lines) + "\n"


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


# --- recipe <-> JSON document mapping ----------------------------------------

def use_to_doc(use: IngredientUse) -> dict:
    return {
        "ingredient_id": use.ingredient_id,
        "quantity": use.quantity,
        "unit": use.unit.value,
        "grams": use.grams,
        "step_index": use.step_index,
        "process": use.process,
    }


def use_from_doc(doc: dict) -> IngredientUse:
    return IngredientUse(
        ingredient_id=str(doc["ingredient_id"]),
        quantity=float(doc.get("quantity", 0.0)),
        unit=Unit(doc.get("unit", "gram")),
        grams=float(doc["grams"]),
        step_index=int(doc.get("step_index", 0)),
        process=str(doc.get("process", "other")),
    )


def step_to_doc(step: Step) -> dict:
    return {"text": step.text, "process": step.process, "refs": list(step.refs)}


def step_from_doc(doc: dict) -> Step:
    return Step(
        text=str(doc["text"]),
        process=str(doc.get("process", "other")),
        refs=tuple(str(r) for r in doc.get("refs", [])),
    )


def recipe_to_doc(recipe: Recipe) -> dict:
    return {
        "id": recipe.id,
        "title": recipe.title,
        "servings": recipe.servings,
        "uses": [use_to_doc(u) for u in recipe.uses],
        "steps": [step_to_doc(s) for s in recipe.steps],
        "regions": sorted(
            ({"code": t.region_code, "relation": t.relation.value} for t in recipe.regions),
            key=lambda d: (d["code"], d["relation"]),
        ),
        "lineage": (
            None
            if recipe.lineage is None
            else {"parent_id": recipe.lineage.parent_id, "script_id": recipe.lineage.script_id}
        ),
    }


def recipe_from_doc(doc: dict) -> Recipe:
    """Parse the JSON recipe document; structural errors raise RecipeInvalidError."""
    try:
        uses = tuple(use_from_doc(u) for u in doc["uses"])
        steps = tuple(step_from_doc(s) for s in doc["steps"])
        regions = frozenset(
            RegionTag(str(t["code"]), RegionRelation(t.get("relation", "origin")))
            for t in doc.get("regions", [])
        )
        lineage_doc = doc.get("lineage")
        lineage = (
            None
            if not lineage_doc
            else Lineage(str(lineage_doc["parent_id"]), str(lineage_doc["script_id"]))
        )
        return Recipe(
            id=str(doc.get("id", "")),
            title=str(doc["title"]),
            servings=int(doc.get("servings", 1)),
            uses=uses,
            steps=steps,
            regions=regions,
            lineage=lineage,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise RecipeInvalidError(f"malformed recipe document: {exc}") from exc

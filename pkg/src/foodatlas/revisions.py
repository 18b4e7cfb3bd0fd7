"""Recipe version control: diff, apply, lineage, and nearest-recipe search.

A revision is recorded as an edit script - an ordered list of typed
operations that transforms the base recipe into the edited one, the way a
version control system records a commit. Ingredient edits key on ingredient
id (substituting oat drink for milk is one Replace op, not a positional
remove/add); steps align by longest common subsequence.

Old-value guards on quantity changes make stale diffs fail loudly instead
of applying to a base that moved underneath the editor.

Scope of a script: title, servings, regions, uses, steps. Recipe id and the
lineage pointer are store metadata and never appear in scripts. Retained
uses keep their list position; added uses append in script order.
"""

from __future__ import annotations

import uuid
from dataclasses import dataclass, replace
from difflib import SequenceMatcher

from .errors import (
    BadRankArgumentError,
    ScriptApplyError,
    StaleBaseError,
    UnknownRecipeError,
)
from .ontology import OntologyGraph
from .store import (
    GraphStore,
    IngredientUse,
    Lineage,
    Recipe,
    RegionTag,
    Step,
    step_from_doc,
    step_to_doc,
    use_from_doc,
    use_to_doc,
    validate_recipe,
)

SCRIPT_FORMAT = "edit-script/v1"


@dataclass(frozen=True)
class AddIngredient:
    use: IngredientUse


@dataclass(frozen=True)
class RemoveIngredient:
    ingredient_id: str


@dataclass(frozen=True)
class ChangeQuantity:
    """Scalar amount change. ``old_grams`` is the stale-base guard; the
    quantity pair rides along so apply reproduces the display amount."""

    ingredient_id: str
    old_grams: float
    new_grams: float
    old_quantity: float
    new_quantity: float


@dataclass(frozen=True)
class ReplaceIngredient:
    old_id: str
    new_id: str


@dataclass(frozen=True)
class InsertStep:
    index: int
    step: Step


@dataclass(frozen=True)
class DeleteStep:
    index: int


@dataclass(frozen=True)
class EditStep:
    index: int
    step: Step


@dataclass(frozen=True)
class SetTitle:
    old: str
    new: str


@dataclass(frozen=True)
class SetServings:
    old: int
    new: int


@dataclass(frozen=True)
class SetRegions:
    old: frozenset[RegionTag]
    new: frozenset[RegionTag]


EditOp = (
    AddIngredient
    | RemoveIngredient
    | ChangeQuantity
    | ReplaceIngredient
    | InsertStep
    | DeleteStep
    | EditStep
    | SetTitle
    | SetServings
    | SetRegions
)


@dataclass(frozen=True)
class EditScript:
    ops: tuple[EditOp, ...]

    def __len__(self) -> int:
        return len(self.ops)

    def __bool__(self) -> bool:
        return bool(self.ops)


def _scalar_pair(use: IngredientUse) -> tuple[float, float]:
    return (use.grams, use.quantity)


def _shape(use: IngredientUse) -> tuple:
    """Everything but the id and the scalar amounts."""
    return (use.unit, use.step_index, use.process)


def diff(a: Recipe, b: Recipe, ontology: OntologyGraph | None = None) -> EditScript:
    """Edit script transforming ``a`` into ``b``; minimal under op count.

    With an ontology, a removed/added ingredient pair with positive
    similarity (same top-level class) and matching non-scalar fields
    becomes one ReplaceIngredient instead of a remove plus add. Output is
    deterministic for equal inputs.
    """
    ops: list[EditOp] = []
    a_uses = {u.ingredient_id: u for u in a.uses}
    b_uses = {u.ingredient_id: u for u in b.uses}

    removed = sorted(set(a_uses) - set(b_uses))
    added = sorted(set(b_uses) - set(a_uses))

    # Pair removals with additions of the same class into Replace ops.
    replacements: list[tuple[str, str]] = []
    if ontology is not None and removed and added:
        candidates = []
        for old in removed:
            for new in added:
                if old not in ontology or new not in ontology:
                    continue
                if _shape(a_uses[old]) != _shape(b_uses[new]):
                    continue
                sim = ontology.similarity(old, new)
                if sim > 0:
                    candidates.append((-sim, old, new))
        taken_old: set[str] = set()
        taken_new: set[str] = set()
        for _, old, new in sorted(candidates):
            if old in taken_old or new in taken_new:
                continue
            taken_old.add(old)
            taken_new.add(new)
            replacements.append((old, new))
        removed = [r for r in removed if r not in taken_old]
        added = [x for x in added if x not in taken_new]

    for ing in removed:
        ops.append(RemoveIngredient(ing))
    for old, new in replacements:
        ops.append(ReplaceIngredient(old, new))
        if _scalar_pair(a_uses[old]) != _scalar_pair(b_uses[new]):
            u0, u1 = a_uses[old], b_uses[new]
            ops.append(ChangeQuantity(new, u0.grams, u1.grams, u0.quantity, u1.quantity))
    for ing in sorted(set(a_uses) & set(b_uses)):
        u0, u1 = a_uses[ing], b_uses[ing]
        if u0 == u1:
            continue
        if _shape(u0) == _shape(u1):
            ops.append(ChangeQuantity(ing, u0.grams, u1.grams, u0.quantity, u1.quantity))
        else:  # unit/step/process changed: replace the whole edge
            ops.append(RemoveIngredient(ing))
            ops.append(AddIngredient(u1))
    for ing in added:
        ops.append(AddIngredient(b_uses[ing]))

    # Steps are aligned on the recipe as it stands after the ingredient ops
    # (Replace rewrites step refs), so the script composes by construction.
    mid = _apply_ops(a, ops, validate=False)
    ops.extend(_diff_steps(mid.steps, b.steps))

    if a.title != b.title:
        ops.append(SetTitle(a.title, b.title))
    if a.servings != b.servings:
        ops.append(SetServings(a.servings, b.servings))
    if a.regions != b.regions:
        ops.append(SetRegions(a.regions, b.regions))
    return EditScript(tuple(ops))


def _diff_steps(old: tuple[Step, ...], new: tuple[Step, ...]) -> list[EditOp]:
    ops: list[EditOp] = []
    matcher = SequenceMatcher(a=old, b=new, autojunk=False)
    offset = 0
    for tag, i1, i2, j1, j2 in matcher.get_opcodes():
        if tag == "equal":
            continue
        n_old, n_new = i2 - i1, j2 - j1
        common = min(n_old, n_new)
        for n in range(common):
            ops.append(EditStep(i1 + offset + n, new[j1 + n]))
        for _ in range(n_old - common):  # old side longer: delete the rest
            ops.append(DeleteStep(i1 + offset + common))
        for n in range(n_new - common):  # new side longer: insert the rest
            ops.append(InsertStep(i1 + offset + common + n, new[j1 + common + n]))
        offset += n_new - n_old
    return ops


def apply(base: Recipe, script: EditScript) -> Recipe:
    """Apply an edit script; guard mismatches raise StaleBaseError.

    The result is revalidated against the structural recipe invariants.
    """
    return _apply_ops(base, script.ops, validate=True)


def _apply_ops(base: Recipe, ops, validate: bool) -> Recipe:
    uses = list(base.uses)
    steps = list(base.steps)
    title = base.title
    servings = base.servings
    regions = base.regions

    def locate(ingredient_id: str) -> int:
        for i, u in enumerate(uses):
            if u.ingredient_id == ingredient_id:
                return i
        raise StaleBaseError(
            f"base has no ingredient {ingredient_id!r}; diff is stale"
        )

    for op in ops:
        if isinstance(op, RemoveIngredient):
            uses.pop(locate(op.ingredient_id))
        elif isinstance(op, AddIngredient):
            if any(u.ingredient_id == op.use.ingredient_id for u in uses):
                raise StaleBaseError(
                    f"base already uses {op.use.ingredient_id!r}; diff is stale"
                )
            uses.append(op.use)
        elif isinstance(op, ChangeQuantity):
            i = locate(op.ingredient_id)
            if uses[i].grams != op.old_grams:
                raise StaleBaseError(
                    f"quantity guard failed for {op.ingredient_id!r}: "
                    f"expected {op.old_grams} g, base has {uses[i].grams} g"
                )
            uses[i] = replace(uses[i], grams=op.new_grams, quantity=op.new_quantity)
        elif isinstance(op, ReplaceIngredient):
            i = locate(op.old_id)
            if any(u.ingredient_id == op.new_id for u in uses):
                raise StaleBaseError(f"base already uses {op.new_id!r}; diff is stale")
            uses[i] = replace(uses[i], ingredient_id=op.new_id)
            steps = [
                replace(
                    s,
                    refs=tuple(op.new_id if r == op.old_id else r for r in s.refs),
                )
                for s in steps
            ]
        elif isinstance(op, InsertStep):
            if not (0 <= op.index <= len(steps)):
                raise ScriptApplyError(f"insert index {op.index} out of range")
            steps.insert(op.index, op.step)
        elif isinstance(op, DeleteStep):
            if not (0 <= op.index < len(steps)):
                raise ScriptApplyError(f"delete index {op.index} out of range")
            steps.pop(op.index)
        elif isinstance(op, EditStep):
            if not (0 <= op.index < len(steps)):
                raise ScriptApplyError(f"edit index {op.index} out of range")
            steps[op.index] = op.step
        elif isinstance(op, SetTitle):
            if title != op.old:
                raise StaleBaseError(f"title guard failed: base says {title!r}")
            title = op.new
        elif isinstance(op, SetServings):
            if servings != op.old:
                raise StaleBaseError(f"servings guard failed: base says {servings}")
            servings = op.new
        elif isinstance(op, SetRegions):
            if regions != op.old:
                raise StaleBaseError("regions guard failed")
            regions = op.new
        else:
            raise ScriptApplyError(f"unknown edit op {op!r}")

    result = Recipe(
        id=base.id,
        title=title,
        servings=servings,
        uses=tuple(uses),
        steps=tuple(steps),
        regions=regions,
        lineage=base.lineage,
    )
    if validate:
        validate_recipe(result, ontology=None)
    return result


# --- serialization -----------------------------------------------------------

def script_to_doc(script: EditScript) -> list[dict]:
    """One op per array element, op tag first, stable field order."""
    out = []
    for op in script.ops:
        if isinstance(op, AddIngredient):
            out.append({"op": "add_ingredient", "use": use_to_doc(op.use)})
        elif isinstance(op, RemoveIngredient):
            out.append({"op": "remove_ingredient", "ingredient_id": op.ingredient_id})
        elif isinstance(op, ChangeQuantity):
            out.append({
                "op": "change_quantity",
                "ingredient_id": op.ingredient_id,
                "old_grams": op.old_grams,
                "new_grams": op.new_grams,
                "old_quantity": op.old_quantity,
                "new_quantity": op.new_quantity,
            })
        elif isinstance(op, ReplaceIngredient):
            out.append({"op": "replace_ingredient", "old_id": op.old_id, "new_id": op.new_id})
        elif isinstance(op, InsertStep):
            out.append({"op": "insert_step", "index": op.index, "step": step_to_doc(op.step)})
        elif isinstance(op, DeleteStep):
            out.append({"op": "delete_step", "index": op.index})
        elif isinstance(op, EditStep):
            out.append({"op": "edit_step", "index": op.index, "step": step_to_doc(op.step)})
        elif isinstance(op, SetTitle):
            out.append({"op": "set_title", "old": op.old, "new": op.new})
        elif isinstance(op, SetServings):
            out.append({"op": "set_servings", "old": op.old, "new": op.new})
        elif isinstance(op, SetRegions):
            out.append({
                "op": "set_regions",
                "old": _regions_doc(op.old),
                "new": _regions_doc(op.new),
            })
    return out


def _regions_doc(tags: frozenset[RegionTag]) -> list[dict]:
    return sorted(
        ({"code": t.region_code, "relation": t.relation.value} for t in tags),
        key=lambda d: (d["code"], d["relation"]),
    )


def _regions_from_doc(docs: list[dict]) -> frozenset[RegionTag]:
    from .store import RegionRelation

    return frozenset(RegionTag(d["code"], RegionRelation(d["relation"])) for d in docs)


def script_from_doc(doc: list[dict]) -> EditScript:
    ops: list[EditOp] = []
    for entry in doc:
        tag = entry["op"]
        if tag == "add_ingredient":
            ops.append(AddIngredient(use_from_doc(entry["use"])))
        elif tag == "remove_ingredient":
            ops.append(RemoveIngredient(entry["ingredient_id"]))
        elif tag == "change_quantity":
            ops.append(ChangeQuantity(
                entry["ingredient_id"],
                float(entry["old_grams"]),
                float(entry["new_grams"]),
                float(entry["old_quantity"]),
                float(entry["new_quantity"]),
            ))
        elif tag == "replace_ingredient":
            ops.append(ReplaceIngredient(entry["old_id"], entry["new_id"]))
        elif tag == "insert_step":
            ops.append(InsertStep(int(entry["index"]), step_from_doc(entry["step"])))
        elif tag == "delete_step":
            ops.append(DeleteStep(int(entry["index"])))
        elif tag == "edit_step":
            ops.append(EditStep(int(entry["index"]), step_from_doc(entry["step"])))
        elif tag == "set_title":
            ops.append(SetTitle(entry["old"], entry["new"]))
        elif tag == "set_servings":
            ops.append(SetServings(int(entry["old"]), int(entry["new"])))
        elif tag == "set_regions":
            ops.append(SetRegions(_regions_from_doc(entry["old"]), _regions_from_doc(entry["new"])))
        else:
            raise ScriptApplyError(f"unknown edit op tag {tag!r}")
    return EditScript(tuple(ops))


# --- lineage tracking --------------------------------------------------------

@dataclass(frozen=True)
class LineageRecord:
    recipe_id: str
    parent_id: str
    script_id: str
    timestamp: str  # ISO 8601


class RevisionTracker:
    """Immutable-once-stored scripts plus the lineage forest over recipes."""

    def __init__(self):
        self.scripts: dict[str, EditScript] = {}
        self.records: dict[str, LineageRecord] = {}
        self._counter = 0

    def next_script_id(self) -> str:
        self._counter += 1
        return f"S{self._counter:06d}"

    def record(self, rec: LineageRecord, script: EditScript) -> None:
        if rec.script_id in self.scripts:
            raise ScriptApplyError(f"script {rec.script_id!r} already stored")
        # forest check: walking parents from the new record must terminate
        seen = {rec.recipe_id}
        cur = rec.parent_id
        while cur in self.records:
            if cur in seen:
                raise ScriptApplyError(f"lineage cycle at {cur!r}")
            seen.add(cur)
            cur = self.records[cur].parent_id
        self.scripts[rec.script_id] = script
        self.records[rec.recipe_id] = rec

    def chain(self, recipe_id: str) -> list[LineageRecord]:
        """Lineage records from the recipe back to its root ancestor."""
        out = []
        cur = recipe_id
        while cur in self.records:
            rec = self.records[cur]
            out.append(rec)
            cur = rec.parent_id
        return out


def derive_revision(
    store: GraphStore,
    tracker: RevisionTracker,
    base_id: str,
    edited: Recipe,
    expected_version: int | None = None,
    new_id: str | None = None,
    timestamp: str = "",
) -> tuple[str, LineageRecord]:
    """Store ``edited`` as a revision of ``base_id`` with its edit script.

    ``expected_version`` implements optimistic concurrency: when given, it
    must equal the base's current version or StaleBaseError is raised.
    """
    try:
        base = store.get(base_id)
    except UnknownRecipeError:
        raise
    if expected_version is not None and store.version(base_id) != expected_version:
        raise StaleBaseError(
            f"base {base_id!r} is at version {store.version(base_id)}, "
            f"caller expected {expected_version}"
        )
    script = diff(base, edited, store.ontology)
    script_id = tracker.next_script_id()
    rid = new_id or edited.id or str(uuid.uuid4())
    if rid == base_id or rid in store.recipe_ids():
        raise StaleBaseError(f"revision id {rid!r} already exists in the store")
    revised = replace(edited, id=rid, lineage=Lineage(base_id, script_id))
    store.upsert_recipe(revised)
    record = LineageRecord(rid, base_id, script_id, timestamp)
    tracker.record(record, script)
    return rid, record


# --- nearest-recipe search ---------------------------------------------------

@dataclass(frozen=True)
class RecipeSketch:
    """What the author knows so far: a few title words and ingredient picks."""

    title: str = ""
    ingredient_ids: tuple[str, ...] = ()


def _title_tokens(text: str) -> frozenset[str]:
    import re as _re

    return frozenset(t for t in _re.split(r"[^a-z0-9']+", text.casefold()) if t)


def soft_jaccard(
    a: set[str] | frozenset[str],
    b: set[str] | frozenset[str],
    ontology: OntologyGraph,
) -> float:
    """Set similarity with ontology-weighted element matches.

    (sum over a of best match in b + sum over b of best match in a)
    divided by (|a| + |b|); empty-vs-anything scores 0.
    """
    if not a and not b:
        return 0.0
    total = 0.0
    for x in a:
        total += max((ontology.similarity(x, y) for y in b), default=0.0)
    for y in b:
        total += max((ontology.similarity(y, x) for x in a), default=0.0)
    return total / (len(a) + len(b))


def nearest(
    store: GraphStore,
    sketch: RecipeSketch,
    k: int,
    title_weight: float | None = None,
) -> list[tuple[str, float]]:
    """Rank stored recipes by closeness to a partial recipe.

    score = soft Jaccard over ingredient sets
            + title_weight * title-token Jaccard overlap,
    descending, ties broken by lexicographic recipe id. ``k`` larger than
    the store clamps to everything.
    """
    from . import config

    if k < 1:
        raise BadRankArgumentError(f"k must be >= 1, got {k}")
    if title_weight is None:
        title_weight = config.NEAREST_TITLE_WEIGHT
    ontology = store.ontology
    sketch_ids = frozenset(sketch.ingredient_ids)
    for ing in sorted(sketch_ids):
        ontology.node(ing)  # raises UnknownNodeError early
    sketch_tokens = _title_tokens(sketch.title)
    scored = []
    for rid in store.recipe_ids():
        recipe = store.get(rid)
        ing_score = soft_jaccard(sketch_ids, recipe.ingredient_ids(), ontology)
        tokens = _title_tokens(recipe.title)
        union = sketch_tokens | tokens
        overlap = len(sketch_tokens & tokens) / len(union) if union else 0.0
        scored.append((rid, ing_score + title_weight * overlap))
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored[:k]

"""English standardization pipeline: free text -> graph-compatible entities.

Ingredient lines follow the grammar ``[quantity] [unit] name [, note]``;
names are linked to ontology nodes by exact match, synonym match, then
bounded-edit-distance fuzzy match. Step sentences are reduced to a process
verb plus the ingredients they mention.

The pipeline is locale-parameterized in one place (the unit token table and
verb lexicon); only English ships. Pure functions over an immutable
ontology.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from importlib import resources

from . import config
from .errors import EmptyRecipeError, LineParseError
from .ontology import NodeKind, OntologyGraph
from .store import IngredientUse, Recipe, Step, Unit


@dataclass(frozen=True)
class ParsedLine:
    quantity: float | None
    unit: Unit | None  # present only when quantity is
    name: str
    note: str = ""


class ResolutionMethod(enum.Enum):
    EXACT = "exact"
    SYNONYM = "synonym"
    FUZZY = "fuzzy"


@dataclass(frozen=True)
class EntityResolution:
    ingredient_id: str
    confidence: float
    method: ResolutionMethod


@dataclass(frozen=True)
class ReportEntry:
    """One flagged input line or sentence; nothing is silently dropped."""

    line: str
    reason: str


@dataclass(frozen=True)
class RawRecipe:
    title: str
    ingredients: tuple[str, ...]
    steps: tuple[str, ...]
    servings: int = 1


@dataclass(frozen=True)
class StandardizedDraft:
    recipe: Recipe
    report: tuple[ReportEntry, ...]


# Accepted unit spellings -> canonical unit. Lowercased, trailing '.' stripped.
UNIT_TOKENS: dict[str, Unit] = {}
for _unit, _spellings in [
    (Unit.GRAM, ["g", "gr", "gram", "grams"]),
    (Unit.MILLILITER, ["ml", "milliliter", "milliliters", "millilitre", "millilitres"]),
    (Unit.CUP, ["cup", "cups", "c"]),
    (Unit.TABLESPOON, ["tbsp", "tbs", "tablespoon", "tablespoons"]),
    (Unit.TEASPOON, ["tsp", "teaspoon", "teaspoons"]),
    (Unit.PIECE, ["piece", "pieces", "pc", "pcs"]),
]:
    for _s in _spellings:
        UNIT_TOKENS[_s] = _unit

_INT_RE = re.compile(r"^\d+$")
_DECIMAL_RE = re.compile(r"^\d+\.\d+$")
_FRACTION_RE = re.compile(r"^(\d+)/(\d+)$")


def _parse_quantity(tokens: list[str]) -> tuple[float | None, int]:
    """Consume a leading quantity; returns (value, tokens consumed)."""
    if not tokens:
        return None, 0
    t0 = tokens[0]
    m = _FRACTION_RE.match(t0)
    if m:
        return int(m.group(1)) / int(m.group(2)), 1
    if _DECIMAL_RE.match(t0):
        return float(t0), 1
    if _INT_RE.match(t0):
        # mixed fraction: "1 1/2"
        if len(tokens) > 1:
            m = _FRACTION_RE.match(tokens[1])
            if m:
                return int(t0) + int(m.group(1)) / int(m.group(2)), 2
        return float(t0), 1
    return None, 0


def parse_ingredient_line(text: str) -> ParsedLine:
    """Parse ``[quantity] [unit] name [, note]``.

    Quantity accepts integers, decimals, plain fractions and mixed fractions
    ("1 1/2"). A unit token is only recognized after a quantity, which keeps
    bare names like "cup cake" intact.
    """
    if not text or not text.strip():
        raise LineParseError("empty ingredient line")
    head, _, note = text.partition(",")
    note = note.strip()
    tokens = head.split()
    quantity, consumed = _parse_quantity(tokens)
    tokens = tokens[consumed:]
    unit: Unit | None = None
    if quantity is not None and tokens:
        unit = UNIT_TOKENS.get(tokens[0].lower().rstrip("."))
        if unit is not None:
            tokens = tokens[1:]
    name = " ".join(tokens).strip()
    if not name:
        raise LineParseError(f"no ingredient name in {text!r}")
    return ParsedLine(quantity=quantity, unit=unit, name=name, note=note)


def render_line(line: ParsedLine) -> str:
    """Canonical rendering; re-parsing yields an equal ParsedLine."""
    parts = []
    if line.quantity is not None:
        q = line.quantity
        parts.append(str(int(q)) if q == int(q) else repr(q))
        if line.unit is not None:
            parts.append(line.unit.value)
    parts.append(line.name)
    text = " ".join(parts)
    if line.note:
        text += f", {line.note}"
    return text


_NORMALIZE_RE = re.compile(r"[^a-z0-9' ]+")
_SPACE_RE = re.compile(r"\s+")


def normalize_name(text: str) -> str:
    text = _NORMALIZE_RE.sub(" ", text.casefold())
    return _SPACE_RE.sub(" ", text).strip()


def edit_distance(a: str, b: str) -> int:
    """Levenshtein distance, single-row DP."""
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def resolve_entity(
    name: str,
    ontology: OntologyGraph,
    max_distance: float = config.FUZZY_MAX_DISTANCE,
) -> EntityResolution | None:
    """Link a free-text name to an ontology node.

    Pipeline: normalization, exact canonical-name match, synonym match, then
    fuzzy match by normalized edit distance (<= ``max_distance``); best score
    wins with a lexicographic id tie-break. Returns None below threshold.
    """
    query = normalize_name(name)
    if not query:
        return None

    exact: list[str] = []
    synonym: list[str] = []
    for node in ontology.nodes():
        if normalize_name(node.name) == query:
            exact.append(node.id)
        elif any(normalize_name(s) == query for s in node.synonyms):
            synonym.append(node.id)
    if exact:
        return EntityResolution(min(exact), 1.0, ResolutionMethod.EXACT)
    if synonym:
        return EntityResolution(min(synonym), config.SYNONYM_CONFIDENCE, ResolutionMethod.SYNONYM)

    best_id: str | None = None
    best_dist = 2.0
    for node in ontology.nodes():
        for candidate in [node.name, *sorted(node.synonyms)]:
            cand = normalize_name(candidate)
            if not cand:
                continue
            dist = edit_distance(query, cand) / max(len(query), len(cand))
            if dist > max_distance:
                continue
            if dist < best_dist or (dist == best_dist and node.id < (best_id or "")):
                best_dist = dist
                best_id = node.id
    if best_id is None:
        return None
    return EntityResolution(
        best_id,
        config.FUZZY_CONFIDENCE_SCALE * (1.0 - best_dist),
        ResolutionMethod.FUZZY,
    )


def default_verb_lexicon() -> frozenset[str]:
    """Process verbs shipped with the package (one per line, UTF-8)."""
    text = resources.files("foodatlas").joinpath("data/process_verbs.txt").read_text("utf-8")
    return parse_verb_lexicon(text)


def parse_verb_lexicon(text: str) -> frozenset[str]:
    return frozenset(
        line.strip().lower() for line in text.splitlines() if line.strip()
    )


def parse_step(
    text: str,
    known_ingredients: dict[str, str],
    verbs: frozenset[str] | None = None,
) -> Step:
    """Reduce a step sentence to (process verb, referenced ingredient ids).

    The first lexicon verb in the sentence becomes the process ("other" when
    none matches); ingredient mentions are matched by normalized substring
    against the known names.
    """
    if verbs is None:
        verbs = default_verb_lexicon()
    normalized = normalize_name(text)
    process = "other"
    for token in normalized.split():
        if token in verbs:
            process = token
            break
    matches: list[tuple[int, str, str]] = []
    for known_name in sorted(known_ingredients):
        norm = normalize_name(known_name)
        if not norm:
            continue
        pos = normalized.find(norm)
        if pos >= 0:
            matches.append((pos, norm, known_ingredients[known_name]))
    refs: list[str] = []
    for _, _, ing_id in sorted(matches):
        if ing_id not in refs:
            refs.append(ing_id)
    return Step(text=text, process=process, refs=tuple(refs))


def standardize_recipe(
    raw: RawRecipe,
    ontology: OntologyGraph,
    verbs: frozenset[str] | None = None,
    piece_masses: dict[str, float] | None = None,
) -> StandardizedDraft:
    """Compose parsing, entity resolution and step parsing into a draft.

    The draft keeps only uses that resolved to concrete nodes; every line
    that failed to parse, resolve, or convert cleanly lands in the report
    (flagged, never dropped silently). Each use's step_index points at the
    first step mentioning it, else 0.
    """
    if verbs is None:
        verbs = default_verb_lexicon()
    if not raw.ingredients:
        raise EmptyRecipeError("raw recipe has no ingredient lines")

    report: list[ReportEntry] = []
    resolved: list[tuple[str, ParsedLine, str]] = []  # (line, parsed, node id)
    for line in raw.ingredients:
        try:
            parsed = parse_ingredient_line(line)
        except LineParseError as exc:
            report.append(ReportEntry(line, f"unparseable: {exc}"))
            continue
        resolution = resolve_entity(parsed.name, ontology)
        if resolution is None:
            report.append(ReportEntry(line, f"no ontology match for {parsed.name!r}"))
            continue
        node = ontology.node(resolution.ingredient_id)
        if node.kind is not NodeKind.CONCRETE:
            report.append(
                ReportEntry(
                    line,
                    f"{parsed.name!r} matched class node {node.id}; "
                    f"pick a concrete ingredient",
                )
            )
            continue
        if any(node.id == nid for _, _, nid in resolved):
            report.append(ReportEntry(line, f"duplicate ingredient {node.id}"))
            continue
        resolved.append((line, parsed, node.id))

    if not resolved and not raw.ingredients:
        raise EmptyRecipeError("raw recipe has no ingredient lines")
    if not resolved:
        raise LineParseError("no ingredient line could be standardized")

    # Known names for step matching: the literal line names plus the
    # canonical names and synonyms of the nodes they resolved to.
    known: dict[str, str] = {}
    for _, parsed, nid in resolved:
        node = ontology.node(nid)
        known.setdefault(parsed.name, nid)
        known.setdefault(node.name, nid)
        for syn in sorted(node.synonyms):
            known.setdefault(syn, nid)

    steps = tuple(parse_step(s, known, verbs) for s in raw.steps)
    if not steps:
        report.append(ReportEntry("", "no steps provided; draft needs at least one"))

    first_step: dict[str, int] = {}
    for idx, step in enumerate(steps):
        for ref in step.refs:
            first_step.setdefault(ref, idx)

    uses = []
    from .nutrition import resolve_grams  # local import to avoid a cycle

    for line, parsed, nid in resolved:
        quantity = parsed.quantity if parsed.quantity is not None else 1.0
        unit = parsed.unit if parsed.unit is not None else Unit.UNITLESS
        try:
            grams = resolve_grams(quantity, unit, nid, ontology, piece_masses)
        except Exception as exc:  # missing density / piece mass: keep the line
            grams = 0.0
            report.append(ReportEntry(line, f"grams unresolved: {exc}"))
        step_index = first_step.get(nid, 0)
        process = steps[step_index].process if steps else "other"
        uses.append(
            IngredientUse(
                ingredient_id=nid,
                quantity=quantity,
                unit=unit,
                grams=grams,
                step_index=step_index,
                process=process,
            )
        )

    recipe = Recipe(
        id="",
        title=raw.title,
        servings=max(1, raw.servings),
        uses=tuple(uses),
        steps=steps,
    )
    return StandardizedDraft(recipe=recipe, report=tuple(report))

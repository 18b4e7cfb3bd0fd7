"""Nutrient-profile algebra.

Ingredient nodes carry per-100g profiles; a dish's profile is the
grams-weighted sum over its ingredient edges. Missing data is never imputed:
ingredients without a table entry land in the profile's coverage flags so
downstream consumers (queries, charts) can exclude rather than guess.

All functions are pure over immutable inputs.
"""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field

from . import config
from .errors import (
    DensityMissingError,
    MissingReferenceKeyError,
    NutrientTableError,
    PieceMassMissingError,
)
from .ontology import OntologyGraph
from .store import Recipe, Unit


class Basis(enum.Enum):
    PER_100G = "per_100g"
    PER_RECIPE = "per_recipe"
    PER_SERVING = "per_serving"


@dataclass(frozen=True)
class NutrientProfile:
    """Non-negative nutrient amounts on a declared basis.

    ``missing`` lists ingredient ids with no table entry at all; ``partial``
    maps a nutrient key to the ingredient ids whose entries lack that key.
    An absent key means unknown, never zero.
    """

    amounts: dict[str, float]
    basis: Basis
    missing: tuple[str, ...] = ()
    partial: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def covered(self, key: str) -> bool:
        """True when the amount for ``key`` is complete: every ingredient
        contributed a value for it."""
        return key in self.amounts and not self.missing and key not in self.partial

    def scaled(self, factor: float, basis: Basis) -> "NutrientProfile":
        return NutrientProfile(
            {k: v * factor for k, v in self.amounts.items()},
            basis,
            self.missing,
            dict(self.partial),
        )


class NutrientTable:
    """Per-100g profiles keyed by ingredient id, plus per-piece masses."""

    def __init__(
        self,
        profiles: dict[str, dict[str, float]],
        piece_masses: dict[str, float] | None = None,
    ):
        self.profiles = profiles
        self.piece_masses = piece_masses or {}
        keys: set[str] = set()
        for p in profiles.values():
            keys.update(p)
        self.keys = keys

    def __contains__(self, ingredient_id: str) -> bool:
        return ingredient_id in self.profiles

    def get(self, ingredient_id: str) -> dict[str, float] | None:
        return self.profiles.get(ingredient_id)

    def to_rows(self) -> list[dict[str, str]]:
        columns = list(config.CORE_NUTRIENT_KEYS) + sorted(
            self.keys - set(config.CORE_NUTRIENT_KEYS)
        )
        if self.piece_masses:
            columns.append(config.PIECE_MASS_COLUMN)
        rows = []
        for ing in sorted(set(self.profiles) | set(self.piece_masses)):
            profile = self.profiles.get(ing, {})
            row = {"ingredient_id": ing}
            for col in columns:
                if col == config.PIECE_MASS_COLUMN:
                    mass = self.piece_masses.get(ing)
                    row[col] = "" if mass is None else repr(mass)
                else:
                    row[col] = "" if col not in profile else repr(profile[col])
            rows.append(row)
        return rows


def load_nutrient_table(
    source: str | io.TextIOBase, ontology: OntologyGraph | None = None
) -> NutrientTable:
    """Parse the per-100g table (CSV, header ``ingredient_id,energy_kcal,...``).

    The four core columns must be present and non-blank on every row;
    extension columns may be blank (blank = unknown for that ingredient).
    A ``piece_g`` column, when present, is per-piece mass metadata rather
    than a nutrient. With an ontology, rows for abstract class nodes are
    rejected: classes carry no profile of their own.
    """
    text = source if isinstance(source, str) else source.read()
    reader = csv.DictReader(io.StringIO(text))
    fields = [f.strip() for f in (reader.fieldnames or [])]
    if not fields or fields[0] != "ingredient_id":
        raise NutrientTableError("nutrient table must start with an ingredient_id column")
    for core in config.CORE_NUTRIENT_KEYS:
        if core not in fields:
            raise NutrientTableError(f"nutrient table missing core column {core!r}")
    nutrient_columns = [
        f for f in fields[1:] if f and f != config.PIECE_MASS_COLUMN
    ]
    profiles: dict[str, dict[str, float]] = {}
    piece_masses: dict[str, float] = {}
    for lineno, rec in enumerate(reader, start=2):
        ing = (rec["ingredient_id"] or "").strip()
        if not ing:
            raise NutrientTableError(f"line {lineno}: blank ingredient_id")
        if ing in profiles:
            raise NutrientTableError(f"line {lineno}: duplicate row for {ing!r}")
        if ontology is not None:
            node = ontology.node(ing)  # raises UnknownNodeError
            if not ontology.is_concrete(ing):
                raise NutrientTableError(
                    f"line {lineno}: {ing!r} is an abstract class node; "
                    f"profiles attach to concrete ingredients only"
                )
            del node
        profile: dict[str, float] = {}
        for col in nutrient_columns:
            raw = (rec.get(col) or "").strip()
            if not raw:
                if col in config.CORE_NUTRIENT_KEYS:
                    raise NutrientTableError(
                        f"line {lineno}: core column {col!r} must not be blank"
                    )
                continue
            try:
                value = float(raw)
            except ValueError:
                raise NutrientTableError(f"line {lineno}: bad number {raw!r} in {col!r}") from None
            if not (value >= 0) or value != value or value in (float("inf"),):
                raise NutrientTableError(f"line {lineno}: {col!r} must be finite and >= 0")
            profile[col] = value
        profiles[ing] = profile
        mass_raw = (rec.get(config.PIECE_MASS_COLUMN) or "").strip()
        if mass_raw:
            mass = float(mass_raw)
            if mass <= 0:
                raise NutrientTableError(f"line {lineno}: piece mass must be positive")
            piece_masses[ing] = mass
    return NutrientTable(profiles, piece_masses)


def dump_nutrient_table(table: NutrientTable) -> str:
    rows = table.to_rows()
    columns = ["ingredient_id"]
    if rows:
        columns = list(rows[0].keys())
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def resolve_grams(
    quantity: float,
    unit: Unit,
    ingredient_id: str,
    ontology: OntologyGraph,
    piece_masses: dict[str, float] | None = None,
) -> float:
    """Convert a (quantity, unit) pair to grams for one ingredient.

    Volume units multiply by the milliliter table and the ingredient's
    density, falling back to the nearest ancestor's density. ``piece`` and
    ``unitless`` need a per-piece mass entry.
    """
    if quantity < 0:
        raise ValueError("quantity must be >= 0")
    ontology.node(ingredient_id)
    if unit is Unit.GRAM:
        return quantity
    if unit.value in config.UNIT_ML:
        density = ontology.nearest_density(ingredient_id)
        if density is None:
            raise DensityMissingError(
                f"no density on {ingredient_id!r} or any ancestor; cannot convert "
                f"{unit.value} to grams"
            )
        return quantity * config.UNIT_ML[unit.value] * density
    # piece / unitless both need a per-piece mass
    mass = (piece_masses or {}).get(ingredient_id)
    if mass is None:
        raise PieceMassMissingError(
            f"no per-piece mass entry for {ingredient_id!r} ({unit.value})"
        )
    return quantity * mass


def derive_recipe_profile(recipe: Recipe, table: NutrientTable) -> NutrientProfile:
    """Whole-recipe profile: sum of per-100g amounts weighted by grams/100.

    Ingredients without a table entry degrade coverage (they are listed in
    ``missing``) instead of silently reading as zero.
    """
    missing: list[str] = []
    present: list[tuple[str, float, dict[str, float]]] = []
    for use in recipe.uses:
        profile = table.get(use.ingredient_id)
        if profile is None:
            missing.append(use.ingredient_id)
        else:
            present.append((use.ingredient_id, use.grams, profile))

    keys: set[str] = set()
    for _, _, profile in present:
        keys.update(profile)

    amounts: dict[str, float] = {}
    partial: dict[str, tuple[str, ...]] = {}
    for key in keys:
        total = 0.0
        lacking = []
        for ing, grams, profile in present:
            if key in profile:
                total += profile[key] * grams / 100.0
            else:
                lacking.append(ing)
        amounts[key] = total
        if lacking:
            partial[key] = tuple(sorted(lacking))
    return NutrientProfile(amounts, Basis.PER_RECIPE, tuple(sorted(missing)), partial)


def per_serving(profile: NutrientProfile, servings: int) -> NutrientProfile:
    """Per-serving view of a whole-recipe profile."""
    if servings < 1:
        raise ValueError("servings must be >= 1")
    if profile.basis is not Basis.PER_RECIPE:
        raise ValueError("per_serving expects a per-recipe profile")
    return profile.scaled(1.0 / servings, Basis.PER_SERVING)


def axis_order(keys: set[str] | list[str]) -> list[str]:
    """Radar axis order: core keys first, then lexicographic extras."""
    keys = set(keys)
    ordered = [k for k in config.CORE_NUTRIENT_KEYS if k in keys]
    ordered.extend(sorted(keys - set(config.CORE_NUTRIENT_KEYS)))
    return ordered


def radar_axes(
    profile: NutrientProfile, reference: dict[str, float]
) -> list[tuple[str, float]]:
    """Amounts normalized by reference intakes, in fixed axis order."""
    axes = []
    for key in axis_order(set(profile.amounts)):
        ref = reference.get(key)
        if ref is None:
            raise MissingReferenceKeyError(f"no reference intake for {key!r}")
        if ref <= 0:
            raise MissingReferenceKeyError(f"reference for {key!r} must be positive")
        axes.append((key, profile.amounts[key] / ref))
    return axes


def load_reference_intake(source: str | io.TextIOBase) -> dict[str, float]:
    """Reference-intake file: CSV in the nutrient key space, single value row."""
    text = source if isinstance(source, str) else source.read()
    reader = csv.DictReader(io.StringIO(text))
    rows = list(reader)
    if not reader.fieldnames or len(rows) != 1:
        raise NutrientTableError("reference intake file needs a header and exactly one row")
    out = {}
    for key, raw in rows[0].items():
        raw = (raw or "").strip()
        if not raw:
            continue
        value = float(raw)
        if value <= 0:
            raise NutrientTableError(f"reference for {key!r} must be positive")
        out[key.strip()] = value
    return out


def profile_to_doc(profile: NutrientProfile) -> dict:
    return {
        "basis": profile.basis.value,
        "amounts": {k: profile.amounts[k] for k in axis_order(set(profile.amounts))},
        "missing": list(profile.missing),
        "partial": {k: list(v) for k, v in sorted(profile.partial.items())},
    }

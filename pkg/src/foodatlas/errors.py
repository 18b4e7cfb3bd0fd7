"""Exception taxonomy shared by all subsystems.

Every error carries a stable machine ``code`` so the HTTP layer and the CLI
can map failures without string matching. New error types must be added to
this module (subclassing :class:`FoodAtlasError`) so the API error mapping
stays total.
"""

from __future__ import annotations


class FoodAtlasError(Exception):
    """Base class for all domain errors."""

    code = "internal"

    def __init__(self, message: str, *, field: str | None = None):
        super().__init__(message)
        self.field = field

    @property
    def message(self) -> str:
        return str(self)


# --- ontology ---------------------------------------------------------------

class OntologyError(FoodAtlasError):
    code = "ontology_invalid"


class DuplicateNodeError(OntologyError):
    code = "ontology_duplicate_id"


class DanglingParentError(OntologyError):
    code = "ontology_dangling_parent"


class CycleError(OntologyError):
    code = "ontology_cycle"


class RootCountError(OntologyError):
    code = "ontology_root_count"


class UnknownNodeError(FoodAtlasError):
    code = "unknown_node"


# --- store ------------------------------------------------------------------

class RecipeInvalidError(FoodAtlasError):
    code = "recipe_invalid"


class UnknownIngredientError(FoodAtlasError):
    code = "unknown_ingredient"


class UnknownRecipeError(FoodAtlasError):
    code = "unknown_recipe"


# --- nutrition --------------------------------------------------------------

class NutrientTableError(FoodAtlasError):
    code = "nutrient_table_invalid"


class DensityMissingError(FoodAtlasError):
    code = "density_missing"


class PieceMassMissingError(FoodAtlasError):
    code = "piece_mass_missing"


class UnknownNutrientKeyError(FoodAtlasError):
    code = "unknown_nutrient_key"


class MissingReferenceKeyError(FoodAtlasError):
    code = "missing_reference_key"


# --- standardization --------------------------------------------------------

class LineParseError(FoodAtlasError):
    code = "line_unparseable"


class EmptyRecipeError(FoodAtlasError):
    code = "raw_recipe_empty"


# --- query ------------------------------------------------------------------

class QuerySyntaxError(FoodAtlasError):
    code = "query_syntax"

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (position {position})", field="text")
        self.position = position


class InconsistentResultError(FoodAtlasError):
    code = "result_inconsistent"


# --- revisions --------------------------------------------------------------

class StaleBaseError(FoodAtlasError):
    """Old-value guard or base-version check failed; caller must rebase."""

    code = "stale_base"


class ScriptApplyError(FoodAtlasError):
    code = "script_unappliable"


# --- suggestion -------------------------------------------------------------

class EmptyCorpusError(FoodAtlasError):
    code = "corpus_empty"


class UntrainedModelError(FoodAtlasError):
    code = "model_untrained"


class BadRankArgumentError(FoodAtlasError):
    code = "bad_rank_argument"


# --- persistence ------------------------------------------------------------

class LogCorruptError(FoodAtlasError):
    code = "log_corrupt"


def error_types() -> list[type[FoodAtlasError]]:
    """All concrete error classes, for exhaustiveness checks."""
    out: list[type[FoodAtlasError]] = []
    stack = [FoodAtlasError]
    while stack:
        cls = stack.pop()
        out.append(cls)
        stack.extend(cls.__subclasses__())
    return sorted(set(out), key=lambda c: c.__name__)

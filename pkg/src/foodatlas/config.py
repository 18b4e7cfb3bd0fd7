"""Tunable constants. Values here are contract-level: tests pin them."""

from __future__ import annotations

# Volume units, in milliliters. Bit-exact; gram conversion multiplies by the
# ingredient density (g/ml).
UNIT_ML = {
    "milliliter": 1.0,
    "cup": 240.0,
    "tablespoon": 15.0,
    "teaspoon": 5.0,
}

# Entity resolution: maximum normalized edit distance for a fuzzy match.
FUZZY_MAX_DISTANCE = 0.25

# Confidence levels per resolution method. Fuzzy confidence is
# FUZZY_CONFIDENCE_SCALE * (1 - distance), which keeps Exact >= Synonym > Fuzzy.
SYNONYM_CONFIDENCE = 0.95
FUZZY_CONFIDENCE_SCALE = 0.9

# Weight of the title-token overlap term in nearest-recipe scoring.
NEAREST_TITLE_WEIGHT = 0.1

# Instruction suggestion: mass reserved for the uniform prior when smoothing
# relative frequencies. Scale-free, so rankings are invariant under scaling
# all counts by a positive constant.
SUGGEST_PRIOR_MASS = 0.1

# Default daily reference intakes used for radar axes when no reference file
# is supplied.
DEFAULT_REFERENCE_INTAKE = {
    "energy_kcal": 2000.0,
    "protein_g": 50.0,
    "fat_g": 70.0,
    "carbohydrate_g": 260.0,
}

# Nutrient keys every per-100g table row must provide, in radar axis order.
CORE_NUTRIENT_KEYS = ("energy_kcal", "protein_g", "fat_g", "carbohydrate_g")

# Nutrient-table column treated as per-piece mass metadata, not a nutrient.
PIECE_MASS_COLUMN = "piece_g"

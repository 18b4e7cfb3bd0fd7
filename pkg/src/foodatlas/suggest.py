"""Frequency-based instruction suggestion.

Candidates are (process verb, ingredient) actions ranked by how often the
verb co-occurs with the ingredient's class across the training corpus,
boosted by how strongly the dish-title tokens associate with the verb. A
deliberately transparent baseline: counts in, ranked templates out, no
learned generation.

Smoothing mixes the observed relative frequency with a uniform prior
(fixed prior mass, see config.SUGGEST_PRIOR_MASS). The mixture is
scale-free: multiplying every count by a positive constant leaves all
rankings unchanged, so rankings depend only on relative frequencies.

Training is single-threaded; a trained model is immutable and safe for
concurrent queries.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from . import config
from .errors import BadRankArgumentError, EmptyCorpusError, UntrainedModelError
from .ontology import OntologyGraph
from .store import Recipe

MODEL_FORMAT = "suggest-model/v1"

_TOKEN_RE = re.compile(r"[^a-z0-9']+")


def title_tokens(title: str) -> list[str]:
    return [t for t in _TOKEN_RE.split(title.casefold()) if t]


@dataclass(frozen=True)
class SuggestModel:
    template_counts: dict[tuple[str, str], int]  # (verb, class id) -> count
    title_token_counts: dict[tuple[str, str], int]  # (title token, verb) -> count
    corpus_size: int  # total training steps
    verbs: tuple[str, ...] = ()
    classes: tuple[str, ...] = ()
    token_totals: dict[str, int] = field(default_factory=dict)

    def scaled(self, factor: int) -> "SuggestModel":
        """Every count multiplied by a positive integer (for invariance tests)."""
        if factor < 1:
            raise ValueError("factor must be a positive integer")
        return SuggestModel(
            {k: v * factor for k, v in self.template_counts.items()},
            {k: v * factor for k, v in self.title_token_counts.items()},
            self.corpus_size * factor,
            self.verbs,
            self.classes,
            {k: v * factor for k, v in self.token_totals.items()},
        )


def train(corpus: list[Recipe], ontology: OntologyGraph) -> SuggestModel:
    """Accumulate (verb, ingredient-class) and (title-token, verb) counts.

    Ingredient ids generalize to their depth-1 ancestor class, so "fry the
    onion" and "fry the leek" reinforce the same template. Steps whose
    process is "other" carry no usable verb and are skipped for counting,
    but still count toward corpus_size.
    """
    if not corpus:
        raise EmptyCorpusError("cannot train on an empty corpus")
    template_counts: dict[tuple[str, str], int] = {}
    token_counts: dict[tuple[str, str], int] = {}
    corpus_size = 0
    for recipe in corpus:
        tokens = title_tokens(recipe.title)
        for step in recipe.steps:
            corpus_size += 1
            verb = step.process
            if verb == "other":
                continue
            for ref in step.refs:
                cls = ontology.class_of(ref)
                key = (verb, cls)
                template_counts[key] = template_counts.get(key, 0) + 1
            for token in tokens:
                key = (token, verb)
                token_counts[key] = token_counts.get(key, 0) + 1
    verbs = tuple(sorted({v for v, _ in template_counts} | {v for _, v in token_counts}))
    classes = tuple(sorted({c for _, c in template_counts}))
    token_totals: dict[str, int] = {}
    for (token, _), count in token_counts.items():
        token_totals[token] = token_totals.get(token, 0) + count
    return SuggestModel(
        template_counts, token_counts, corpus_size, verbs, classes, token_totals
    )


def _template_prob(model: SuggestModel, verb: str, cls: str) -> float:
    w = config.SUGGEST_PRIOR_MASS
    total = sum(model.template_counts.values())
    k = max(1, len(model.verbs) * max(1, len(model.classes)))
    observed = model.template_counts.get((verb, cls), 0)
    freq = observed / total if total else 0.0
    return (1.0 - w) * freq + w / k


def _title_affinity(model: SuggestModel, tokens: list[str], verb: str) -> float:
    """Mean smoothed probability of the verb given each title token."""
    if not tokens or not model.verbs:
        return 0.0
    w = config.SUGGEST_PRIOR_MASS
    uniform = 1.0 / len(model.verbs)
    total_aff = 0.0
    for token in tokens:
        token_total = model.token_totals.get(token, 0)
        if token_total == 0:
            total_aff += uniform
            continue
        observed = model.title_token_counts.get((token, verb), 0)
        total_aff += (1.0 - w) * (observed / token_total) + w * uniform
    return total_aff / len(tokens)


@dataclass(frozen=True)
class SuggestedStep:
    text: str  # rendered template, e.g. "fry the onion"
    verb: str
    ingredient_id: str
    score: float


def suggest_steps(
    title: str,
    ingredients: list[str],
    k: int,
    model: SuggestModel | None,
    ontology: OntologyGraph,
) -> list[SuggestedStep]:
    """Top-k candidate actions for the given dish title and ingredient list.

    Candidates pair each provided ingredient with each verb the model has
    seen; the score is the smoothed template frequency times
    (1 + title affinity). Ties order by rendered text. Never emits an
    ingredient that was not in the input.
    """
    if k < 1:
        raise BadRankArgumentError(f"k must be >= 1, got {k}")
    if model is None or model.corpus_size == 0:
        raise UntrainedModelError("suggestion model has not been trained")
    tokens = title_tokens(title)
    candidates: list[SuggestedStep] = []
    seen: set[tuple[str, str]] = set()
    for ing in ingredients:
        node = ontology.node(ing)
        cls = ontology.class_of(ing)
        for verb in model.verbs:
            if (verb, ing) in seen:
                continue
            seen.add((verb, ing))
            score = _template_prob(model, verb, cls) * (
                1.0 + _title_affinity(model, tokens, verb)
            )
            candidates.append(
                SuggestedStep(f"{verb} the {node.name}", verb, ing, score)
            )
    candidates.sort(key=lambda c: (-c.score, c.text))
    return candidates[:k]


# --- serialization -----------------------------------------------------------

def model_to_doc(model: SuggestModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "corpus_size": model.corpus_size,
        "verbs": list(model.verbs),
        "classes": list(model.classes),
        "template_counts": [
            [v, c, n] for (v, c), n in sorted(model.template_counts.items())
        ],
        "title_token_counts": [
            [t, v, n] for (t, v), n in sorted(model.title_token_counts.items())
        ],
    }


def model_from_doc(doc: dict) -> SuggestModel:
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError(f"unsupported model format {doc.get('format')!r}")
    template = {(v, c): int(n) for v, c, n in doc["template_counts"]}
    tokens = {(t, v): int(n) for t, v, n in doc["title_token_counts"]}
    token_totals: dict[str, int] = {}
    for (token, _), count in tokens.items():
        token_totals[token] = token_totals.get(token, 0) + count
    return SuggestModel(
        template,
        tokens,
        int(doc["corpus_size"]),
        tuple(doc["verbs"]),
        tuple(doc["classes"]),
        token_totals,
    )


def dump_model(model: SuggestModel) -> str:
    return json.dumps(model_to_doc(model), indent=2, sort_keys=True)


def load_model(text: str) -> SuggestModel:
    return model_from_doc(json.loads(text))

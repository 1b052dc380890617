"""Expected shapes for every structured model call, with contextual checks.

Shape checking is delegated to jsonschema; the extra callables enforce what a
JSON Schema cannot express (id sets matching supplied evidence, word bounds).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Mapping, Optional

import jsonschema

from .fields import CoarseField
from .models import MAX_TITLE_WORDS, word_count


class SchemaViolation(Exception):
    """Model output parsed as JSON but does not satisfy the named schema."""


Extra = Callable[[Any, Mapping[str, Any]], None]


@dataclass(frozen=True)
class OutputSchema:
    name: str
    json_schema: dict
    extra: Optional[Extra] = None

    def validate(self, parsed: Any, context: Mapping[str, Any]) -> None:
        validator = jsonschema.Draft202012Validator(self.json_schema)
        errors = sorted(validator.iter_errors(parsed), key=lambda e: list(e.absolute_path))
        if errors:
            first = errors[0]
            where = "/".join(str(p) for p in first.absolute_path) or "<root>"
            raise SchemaViolation(f"{self.name}: at {where}: {first.message}")
        if self.extra is not None:
            self.extra(parsed, context)


def _nonempty(min_len: int = 1) -> dict:
    return {"type": "string", "minLength": min_len}


_COARSE_LABELS = list(CoarseField.labels())


def _check_decomposition(parsed: Any, context: Mapping[str, Any]) -> None:
    for i, q in enumerate(parsed["questions"]):
        if q["domain_specific"].strip() == q["domain_agnostic"].strip():
            raise SchemaViolation(f"decomposition: question {i} has identical dual texts")


def _check_id_flags(key: str):
    def check(parsed: Any, context: Mapping[str, Any]) -> None:
        expected = set(context.get("paper_ids", ()))
        got = [entry["paper_id"] for entry in parsed[key]]
        if len(set(got)) != len(got):
            raise SchemaViolation(f"duplicate paper_id in {key}")
        if set(got) != expected:
            missing = sorted(expected - set(got))
            extra = sorted(set(got) - expected)
            raise SchemaViolation(
                f"{key} must flag exactly the provided papers (missing={missing}, unknown={extra})"
            )

    return check


def _check_coverage(parsed: Any, context: Mapping[str, Any]) -> None:
    _check_id_flags("snippets")(parsed, context)
    relevant = [s["paper_id"] for s in parsed["snippets"] if s["relevant"]]
    if relevant and not any(pid in parsed["rationale"] for pid in relevant):
        raise SchemaViolation("coverage: rationale must cite at least one relevant paper id")


def _check_fragment(parsed: Any, context: Mapping[str, Any]) -> None:
    if word_count(parsed["title"]) > MAX_TITLE_WORDS:
        raise SchemaViolation(f"fragment: title exceeds {MAX_TITLE_WORDS} words")
    allowed = context.get("takeaway_ids")
    if allowed is not None:
        allowed = set(allowed)
        for sel in parsed["integration_mechanism"]["selected_takeaways"]:
            if sel["takeaway_id"] not in allowed:
                raise SchemaViolation(
                    f"fragment: selected takeaway {sel['takeaway_id']!r} is not among the provided takeaways"
                )


_FRAGMENT_TREE = {
    "type": "object",
    "required": [
        "title",
        "core_insight",
        "integration_mechanism",
        "challenge_resolution",
        "concrete_realization",
    ],
    "additionalProperties": False,
    "properties": {
        "title": _nonempty(),
        "core_insight": _nonempty(),
        "integration_mechanism": {
            "type": "object",
            "required": ["target_domain_elements", "selected_takeaways", "synthesis_approach"],
            "additionalProperties": False,
            "properties": {
                "target_domain_elements": {"type": "array", "items": _nonempty(), "minItems": 1},
                "selected_takeaways": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "required": [
                            "takeaway_id",
                            "source_domain_formulation",
                            "mechanism_explanation",
                            "selection_rationale",
                        ],
                        "additionalProperties": False,
                        "properties": {
                            "takeaway_id": _nonempty(),
                            "source_domain_formulation": _nonempty(),
                            "mechanism_explanation": _nonempty(),
                            "selection_rationale": _nonempty(),
                        },
                    },
                },
                "synthesis_approach": _nonempty(),
            },
        },
        "challenge_resolution": {
            "type": "object",
            "required": [
                "addresses_target_challenge",
                "addresses_source_limitations",
                "addresses_research_problem",
            ],
            "additionalProperties": False,
            "properties": {
                "addresses_target_challenge": _nonempty(),
                "addresses_source_limitations": _nonempty(),
                "addresses_research_problem": _nonempty(),
            },
        },
        "concrete_realization": {
            "type": "object",
            "required": ["proposed_approach", "key_innovations"],
            "additionalProperties": False,
            "properties": {
                "proposed_approach": _nonempty(),
                "key_innovations": {"type": "array", "items": _nonempty(), "minItems": 1},
            },
        },
    },
}


def _judge_block(criteria: tuple[str, ...], block_key: str) -> dict:
    criterion_obj = {
        "type": "object",
        "required": ["preferred_method", "reasoning"],
        "properties": {
            "preferred_method": {"type": "integer", "enum": [1, 2]},
            "reasoning": _nonempty(),
        },
    }
    return {
        "type": "object",
        "required": [block_key, "overall_assessment"],
        "properties": {
            block_key: {
                "type": "object",
                "required": list(criteria),
                "properties": {name: criterion_obj for name in criteria},
            },
            "overall_assessment": {
                "type": "object",
                "required": ["preferred_method", "summary"],
                "properties": {
                    "preferred_method": {"type": "integer", "enum": [1, 2]},
                    "summary": _nonempty(),
                },
            },
        },
    }


SCHEMAS: dict[str, OutputSchema] = {
    "decomposition": OutputSchema(
        name="decomposition",
        json_schema={
            "type": "object",
            "required": ["questions"],
            "properties": {
                "questions": {
                    "type": "array",
                    "minItems": 3,
                    "maxItems": 8,
                    "items": {
                        "type": "object",
                        "required": ["domain_specific", "domain_agnostic", "search_queries"],
                        "properties": {
                            "domain_specific": _nonempty(),
                            "domain_agnostic": _nonempty(),
                            "search_queries": {
                                "type": "array",
                                "items": _nonempty(),
                                "minItems": 1,
                                "maxItems": 3,
                            },
                        },
                    },
                }
            },
        },
        extra=_check_decomposition,
    ),
    "coverage": OutputSchema(
        name="coverage",
        json_schema={
            "type": "object",
            "required": ["snippets", "klass", "rationale"],
            "properties": {
                "snippets": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["paper_id", "relevant"],
                        "properties": {"paper_id": _nonempty(), "relevant": {"type": "boolean"}},
                    },
                },
                "klass": {"type": "string", "enum": ["resolved", "partial", "open"]},
                "rationale": _nonempty(),
            },
        },
        extra=_check_coverage,
    ),
    "challenges": OutputSchema(
        name="challenges",
        json_schema={
            "type": "object",
            "required": ["challenges"],
            "properties": {
                "challenges": {
                    "type": "array",
                    "minItems": 1,
                    "maxItems": 3,
                    "items": {
                        "type": "object",
                        "required": ["domain_specific", "domain_agnostic"],
                        "properties": {
                            "domain_specific": _nonempty(),
                            "domain_agnostic": _nonempty(),
                        },
                    },
                }
            },
        },
    ),
    "source_domains": OutputSchema(
        name="source_domains",
        json_schema={
            "type": "object",
            "required": ["candidates"],
            "properties": {
                "candidates": {
                    "type": "array",
                    "minItems": 2,
                    "maxItems": 5,
                    "items": {
                        "type": "object",
                        "required": ["field", "rationale", "rationale_kind", "search_queries"],
                        "properties": {
                            "field": _nonempty(),
                            "rationale": _nonempty(),
                            "rationale_kind": {
                                "type": "string",
                                "enum": ["analogy", "shared_mechanism", "transferable_principle"],
                            },
                            "search_queries": {
                                "type": "array",
                                "items": _nonempty(),
                                "minItems": 1,
                                "maxItems": 3,
                            },
                        },
                    },
                }
            },
        },
    ),
    "relevance": OutputSchema(
        name="relevance",
        json_schema={
            "type": "object",
            "required": ["papers"],
            "properties": {
                "papers": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["paper_id", "relevant"],
                        "properties": {"paper_id": _nonempty(), "relevant": {"type": "boolean"}},
                    },
                }
            },
        },
        extra=_check_id_flags("papers"),
    ),
    "takeaways": OutputSchema(
        name="takeaways",
        json_schema={
            "type": "object",
            "required": ["takeaways"],
            "properties": {
                "takeaways": {
                    "type": "array",
                    "minItems": 1,
                    "maxItems": 3,
                    "items": {
                        "type": "object",
                        "required": ["concept", "mechanism", "supporting_paper_ids"],
                        "properties": {
                            "concept": _nonempty(),
                            "mechanism": _nonempty(),
                            "supporting_paper_ids": {"type": "array", "items": _nonempty(), "minItems": 1},
                        },
                    },
                }
            },
        },
    ),
    "fragment": OutputSchema(name="fragment", json_schema=_FRAGMENT_TREE, extra=_check_fragment),
    "comparison": OutputSchema(
        name="comparison",
        json_schema={
            "type": "object",
            "required": ["preferred_fragment", "rationale"],
            "properties": {
                "preferred_fragment": {"type": "integer", "enum": [1, 2]},
                "rationale": _nonempty(),
            },
        },
    ),
    "leakage_screen": OutputSchema(
        name="leakage_screen",
        json_schema={
            "type": "object",
            "required": ["leaks", "reasoning"],
            "properties": {
                "leaks": {"type": "boolean"},
                "reasoning": _nonempty(),
            },
        },
    ),
    "containment": OutputSchema(
        name="containment",
        json_schema={
            "type": "object",
            "required": ["contained"],
            "properties": {
                "contained": {"type": "boolean"},
                "issues": {"type": "array", "items": {"type": "string"}},
            },
        },
    ),
    "queries": OutputSchema(
        name="queries",
        json_schema={
            "type": "object",
            "required": ["search_queries"],
            "properties": {
                "search_queries": {"type": "array", "items": _nonempty(), "minItems": 1, "maxItems": 3}
            },
        },
    ),
    "domain_classification": OutputSchema(
        name="domain_classification",
        json_schema={
            "type": "object",
            "required": ["field"],
            "properties": {"field": {"type": "string", "enum": _COARSE_LABELS}},
        },
    ),
    "judge_takeaway": OutputSchema(
        name="judge_takeaway",
        json_schema=_judge_block(
            ("interdisciplinary_insightfulness", "interdisciplinary_relevance"), "takeaway_comparison"
        ),
    ),
    "judge_idea": OutputSchema(
        name="judge_idea",
        json_schema=_judge_block(
            ("interdisciplinary_novelty", "interdisciplinary_usefulness"), "idea_comparison"
        ),
    ),
}

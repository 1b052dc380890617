"""Deterministic text renderings of domain objects for prompt bindings."""

from __future__ import annotations

import json
from typing import Iterable, Mapping, Optional

from .fields import CoarseField
from .models import IdeaFragment, PaperSnippet, Takeaway, fragment_to_dict


def render_evidence_block(snippets: Iterable[PaperSnippet]) -> str:
    parts = []
    for s in snippets:
        year = s.year if s.year is not None else "?"
        parts.append(f"[{s.paper_id}] ({year}) {s.title}\n{s.snippet_text}")
    return "\n\n".join(parts)


def render_takeaway_block(takeaways: Iterable[Takeaway]) -> str:
    parts = []
    for t in takeaways:
        papers = ", ".join(t.supporting_paper_ids)
        parts.append(f"[{t.id}] {t.concept}\nmechanism: {t.mechanism}\npapers: {papers}")
    return "\n\n".join(parts)


def render_fields_block(fields: Iterable[CoarseField]) -> str:
    return "\n".join(f"- {f.value}" for f in fields)


def fragment_tree_dict(fragment: IdeaFragment) -> dict:
    """The nested idea-fragment document without run metadata."""
    full = fragment_to_dict(fragment)
    return {
        key: full[key]
        for key in (
            "title",
            "core_insight",
            "integration_mechanism",
            "challenge_resolution",
            "concrete_realization",
        )
    }


def render_fragment_text(fragment: IdeaFragment, source_domain_label: Optional[str] = None) -> str:
    doc: dict = {}
    if source_domain_label:
        doc["source_domain"] = source_domain_label
    doc.update(fragment_tree_dict(fragment))
    return json.dumps(doc, ensure_ascii=False, indent=1, sort_keys=True)


def render_takeaway_texts(takeaways: Iterable[Takeaway]) -> str:
    """Prose view of takeaways for judge prompts (concept plus mechanism)."""
    parts = []
    for i, t in enumerate(takeaways, start=1):
        parts.append(f"Takeaway {i}: {t.concept}\nHow it works: {t.mechanism}")
    return "\n\n".join(parts)


def render_selected_takeaway_texts(fragment: IdeaFragment) -> str:
    parts = []
    for i, sel in enumerate(fragment.integration_mechanism.selected_takeaways, start=1):
        parts.append(f"Takeaway {i}: {sel.source_domain_formulation}\nHow it works: {sel.mechanism_explanation}")
    return "\n\n".join(parts)

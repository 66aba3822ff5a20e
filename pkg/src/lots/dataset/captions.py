"""Garment caption synthesis: remote generator with a deterministic template."""

from __future__ import annotations

import logging

from .clients import ClientError, TextGenClient
from .manifest import CAPTION_TOKEN_LIMIT, GarmentRecord, PartRecord

log = logging.getLogger(__name__)

CAPTION_INSTRUCTION = (
    "You act as a fashion expert. Synthesize the given garment categories and "
    "attributes into one cohesive, opinion-free description that preserves the "
    f"structural hierarchy of the items, within a {CAPTION_TOKEN_LIMIT}-token limit."
)


def template_caption(category: str, attributes: list[str], colors: list[str],
                     parts: list[PartRecord]) -> str:
    """Deterministic serialization: 'a {colors} {attributes} {category} with ...'."""
    head = " ".join([w for w in (list(colors) + list(attributes)) if w])
    caption = f"a {head} {category}".replace("  ", " ").strip()
    if parts:
        clauses = []
        for p in parts:
            attrs = " ".join(p.attributes)
            clauses.append(f"a {attrs} {p.category}".replace("  ", " ").strip())
        caption += " with " + ", ".join(clauses)
    return caption


def truncate_caption(caption: str, limit: int = CAPTION_TOKEN_LIMIT) -> tuple[str, bool]:
    words = caption.split()
    if len(words) <= limit:
        return caption, False
    return " ".join(words[:limit]), True


def caption_garment(record: GarmentRecord, client: TextGenClient | None = None) -> tuple[str, list[str]]:
    """Caption one garment; returns (caption, provenance flags).

    With a client the structured annotation is sent under the fashion-expert
    instruction; any failure falls back to the template and is flagged.
    """
    flags: list[str] = []
    if client is not None:
        prompt = _annotation_prompt(record)
        try:
            caption = client.generate(CAPTION_INSTRUCTION, prompt).strip()
        except ClientError as exc:
            log.warning("caption client failed (%s); using template", exc)
            caption = template_caption(record.category, record.attributes,
                                       record.colors, record.parts)
            flags.append("caption_fallback")
    else:
        caption = template_caption(record.category, record.attributes,
                                   record.colors, record.parts)
    caption, truncated = truncate_caption(caption)
    if truncated:
        flags.append("caption_truncated")
    return caption, flags


def _annotation_prompt(record: GarmentRecord) -> str:
    lines = [f"garment: {record.category}"]
    if record.colors:
        lines.append("colors: " + ", ".join(record.colors))
    if record.attributes:
        lines.append("attributes: " + ", ".join(record.attributes))
    for p in record.parts:
        attrs = ", ".join(p.attributes) if p.attributes else "-"
        lines.append(f"part: {p.category} ({attrs})")
    return "\n".join(lines)

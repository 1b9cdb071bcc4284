"""Concept text normalization.

Mirrors the consuming engine's preprocessing contract: underscore runs
become single spaces, matched outer angle brackets are stripped, and the
result is whitespace-trimmed. `"<wikicat_Danish_male_film_actors>"`
becomes `"wikicat Danish male film actors"`.
"""

from .errors import EncoderError


def clean_concept_name(raw: str) -> str:
    text = raw.strip()
    while len(text) >= 2 and text.startswith("<") and text.endswith(">"):
        text = text[1:-1].strip()
    text = " ".join(text.replace("_", " ").split())
    if not text:
        raise EncoderError(f"empty concept text after preprocessing: {raw!r}")
    return text


def build_text(name: str, description: str | None) -> str:
    """Encoder input: the cleaned name, with the description appended after
    a sentence boundary when one exists."""
    cleaned = clean_concept_name(name)
    if description:
        return f"{cleaned}. {description}"
    return cleaned

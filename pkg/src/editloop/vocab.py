"""Closed attribute vocabularies, the shipped color palette, and canonicalization.

Attribute equality throughout the package is equality of canonical tokens;
`canonicalize` is the single funnel that turns raw user strings into tokens.
Unmappable values come back as the NOT_CANONICAL sentinel, never an exception.
"""

from __future__ import annotations

import json
from importlib import resources

SIZES = ("small", "medium", "large")
MATERIALS = ("matte", "striped", "dotted", "glossy")
SHAPES = ("rectangle", "circle", "triangle")

ADJUSTABLE_ATTRIBUTES = ("color", "size", "material", "shape")


def _load_palette() -> dict[str, tuple[int, int, int]]:
    raw = json.loads(resources.files("editloop.data").joinpath("palette.json").read_text())
    return {name: (v["r"], v["g"], v["b"]) for name, v in raw["colors"].items()}


PALETTE: dict[str, tuple[int, int, int]] = _load_palette()
COLORS: tuple[str, ...] = tuple(PALETTE.keys())


class _NotCanonical:
    """Marker for values outside the closed vocabularies (a value, not an error)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "NOT_CANONICAL"

    def __bool__(self):
        return False


NOT_CANONICAL = _NotCanonical()

# Synonyms map to canonical tokens after whitespace/case normalization.
# Deliberately not exhaustive: values like "huge" stay unmapped.
_SYNONYMS = {
    "color": {
        "grey": "gray",
        "seafoam-green": "sea-foam-green",
        "seafoam": "sea-foam-green",
        "sea-foam": "sea-foam-green",
        "creamy": "cream",
        "creamy-white": "cream",
        "violet": "purple",
        "scarlet": "crimson",
    },
    "size": {
        "big": "large",
        "little": "small",
        "tiny": "small",
        "mid": "medium",
        "mid-size": "medium",
    },
    "material": {
        "stripey": "striped",
        "stripy": "striped",
        "stripes": "striped",
        "spotted": "dotted",
        "polka-dot": "dotted",
        "dots": "dotted",
        "shiny": "glossy",
        "gloss": "glossy",
        "flat": "matte",
        "dull": "matte",
    },
    "shape": {
        "rect": "rectangle",
        "square": "rectangle",
        "box": "rectangle",
        "round": "circle",
        "disc": "circle",
        "disk": "circle",
        "tri": "triangle",
    },
}

_VOCABULARIES = {
    "color": COLORS,
    "size": SIZES,
    "material": MATERIALS,
    "shape": SHAPES,
}


def vocabulary(attribute: str) -> tuple[str, ...]:
    """Return the closed vocabulary for an adjustable attribute."""
    try:
        return _VOCABULARIES[attribute]
    except KeyError:
        raise KeyError(f"no vocabulary for attribute {attribute!r}") from None


def normalize_token(raw: str) -> str:
    """Lowercase and collapse space/underscore separators to hyphens."""
    token = raw.strip().lower()
    for sep in (" ", "_"):
        token = token.replace(sep, "-")
    while "--" in token:
        token = token.replace("--", "-")
    return token


def canonicalize(attribute: str, raw_value: str):
    """Map a raw value into `attribute`'s closed vocabulary.

    Returns the canonical token, or NOT_CANONICAL if the normalized value is
    neither a vocabulary member nor a shipped synonym.
    """
    if not raw_value:
        raise ValueError("raw_value must be non-empty")
    vocab = vocabulary(attribute)
    token = normalize_token(raw_value)
    if token in vocab:
        return token
    mapped = _SYNONYMS.get(attribute, {}).get(token)
    if mapped is not None:
        return mapped
    return NOT_CANONICAL


def is_canonical(attribute: str, value: str) -> bool:
    return value in vocabulary(attribute)


def human_phrase(token: str) -> str:
    """Render a canonical token for prose ("sea-foam-green" -> "sea foam green")."""
    return token.replace("-", " ")

"""Word counting and rule-based detection of paper-like structure in syntheses.

A synthesis is supposed to be a single flowing paragraph. Two rule families
flag deviations: a heading vocabulary (17 academic section terms matched only
in line-initial heading position) and 9 named reference-form identifiers
(citations, URLs, DOIs, bibliography-shaped lines). Inline citations of the
form ``(1)`` or ``(3, 5)`` are mandated by the generation prompt and are
whitelisted before the reference identifiers run.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import yaml

VOCABULARY_SIZE = 17
REFERENCE_PATTERN_COUNT = 9


class PatternConfigError(ValueError):
    """Raised when a pattern config file violates its contract."""


@dataclass(frozen=True)
class TermHit:
    term: str
    offset: int


@dataclass(frozen=True)
class PatternHit:
    pattern: str
    offset: int
    text: str


@dataclass(frozen=True)
class StructureReport:
    """Word count plus the paper-structure flag and its evidence."""

    word_count: int
    is_paper_structured: bool
    matched_terms: list[TermHit] = field(default_factory=list)
    matched_reference_patterns: list[PatternHit] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "word_count": self.word_count,
            "is_paper_structured": self.is_paper_structured,
            "matched_terms": [
                {"term": h.term, "offset": h.offset} for h in self.matched_terms
            ],
            "matched_reference_patterns": [
                {"pattern": h.pattern, "offset": h.offset, "text": h.text}
                for h in self.matched_reference_patterns
            ],
        }


class PatternConfig:
    """Compiled heading vocabulary, reference identifiers and citation whitelist.

    Compiles everything once at construction; instances are immutable in
    practice and safe to share across threads.
    """

    def __init__(
        self,
        vocabulary: list[str],
        reference_patterns: dict[str, str],
        citation_whitelist: str,
        version: str = "unversioned",
    ):
        if len(vocabulary) != VOCABULARY_SIZE:
            raise PatternConfigError(
                f"vocabulary must have exactly {VOCABULARY_SIZE} terms, got {len(vocabulary)}"
            )
        if len(set(t.lower() for t in vocabulary)) != VOCABULARY_SIZE:
            raise PatternConfigError("vocabulary terms must be unique")
        if len(reference_patterns) != REFERENCE_PATTERN_COUNT:
            raise PatternConfigError(
                f"reference_patterns must have exactly {REFERENCE_PATTERN_COUNT} "
                f"entries, got {len(reference_patterns)}"
            )
        self.version = version
        self.vocabulary = list(vocabulary)
        self.reference_sources = dict(reference_patterns)
        try:
            # A term is a heading only at line start, optionally followed by
            # a colon; otherwise the line must end right after it.
            self._term_res = [
                (
                    term,
                    re.compile(
                        r"^[ \t]*" + re.escape(term) + r"[ \t]*(?::|$)",
                        re.IGNORECASE | re.MULTILINE,
                    ),
                )
                for term in vocabulary
            ]
            # Case handling is written into each pattern source; a global
            # IGNORECASE would let name-shaped patterns match plain prose.
            self._reference_res = {
                name: re.compile(src, re.MULTILINE)
                for name, src in reference_patterns.items()
            }
            self._whitelist_re = re.compile(citation_whitelist)
        except re.error as exc:
            raise PatternConfigError(f"pattern does not compile: {exc}") from exc
        self.citation_whitelist_source = citation_whitelist


def load_pattern_config(path: str | Path) -> PatternConfig:
    """Load a PatternConfig from a YAML file."""
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    return _config_from_mapping(raw, source=str(path))


def _config_from_mapping(raw: dict, source: str) -> PatternConfig:
    for key in ("vocabulary", "reference_patterns", "citation_whitelist"):
        if key not in raw:
            raise PatternConfigError(f"{source}: missing key {key!r}")
    return PatternConfig(
        vocabulary=raw["vocabulary"],
        reference_patterns=raw["reference_patterns"],
        citation_whitelist=raw["citation_whitelist"],
        version=str(raw.get("version", "unversioned")),
    )


@lru_cache(maxsize=1)
def default_pattern_config() -> PatternConfig:
    """The packaged pattern config (data/patterns.yaml)."""
    raw = yaml.safe_load(
        resources.files("synthkit").joinpath("data/patterns.yaml").read_text("utf-8")
    )
    return _config_from_mapping(raw, source="synthkit/data/patterns.yaml")


def word_count(text: str) -> int:
    """Count maximal whitespace-delimited tokens; empty input counts 0."""
    return len(text.split())


def _redact_whitelisted(text: str, config: PatternConfig) -> str:
    # Equal-length space substitution keeps every offset aligned with the
    # original text.
    return config._whitelist_re.sub(lambda m: " " * len(m.group(0)), text)


def detect_paper_structure(text: str, config: PatternConfig | None = None) -> StructureReport:
    """Flag paper-like structure and collect the matched evidence.

    The flag is true iff at least one vocabulary heading or one reference
    pattern matches. Whitelisted ``(n)``-style citations are blanked out
    before the reference patterns run, so they can never flip the flag.
    """
    config = config or default_pattern_config()

    term_hits: list[TermHit] = []
    for term, term_re in config._term_res:
        for m in term_re.finditer(text):
            start = m.start() + len(m.group(0)) - len(m.group(0).lstrip())
            term_hits.append(TermHit(term=term, offset=start))

    redacted = _redact_whitelisted(text, config)
    ref_hits: list[PatternHit] = []
    for name, ref_re in config._reference_res.items():
        for m in ref_re.finditer(redacted):
            ref_hits.append(PatternHit(pattern=name, offset=m.start(), text=m.group(0)))

    term_hits.sort(key=lambda h: h.offset)
    ref_hits.sort(key=lambda h: h.offset)
    return StructureReport(
        word_count=word_count(text),
        is_paper_structured=bool(term_hits or ref_hits),
        matched_terms=term_hits,
        matched_reference_patterns=ref_hits,
    )


def analyze(text: str, config: PatternConfig | None = None) -> StructureReport:
    """One-call word count plus structure detection."""
    return detect_paper_structure(text, config)

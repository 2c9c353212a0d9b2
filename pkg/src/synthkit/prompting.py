"""Deterministic prompt construction for synthesis generation and evaluation.

Both prompt families are pure functions of their inputs plus a versioned
config file: no clock, no randomness. The generation prompt substitutes the
research problem, a per-type instruction, and five numbered paper blocks;
the evaluation prompt embeds the nine-aspect rubric and demands a fenced
``name: rating`` block so replies stay machine-parseable.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from importlib import resources
from pathlib import Path

import yaml

PLACEHOLDER_PROBLEM = "[research-problem]"
PLACEHOLDER_INSTRUCTION = "[prompt-type-input-instruction]"
PLACEHOLDER_CONTENT_RE = re.compile(r"\[content-\d+\]")


class PromptConfigError(ValueError):
    """Raised when a prompt config file violates its contract."""


class SynthesisType(str, Enum):
    PAPER_WISE = "paper_wise"
    METHODOLOGICAL = "methodological"
    THEMATIC = "thematic"

    @classmethod
    def parse(cls, value: "SynthesisType | str") -> "SynthesisType":
        if isinstance(value, cls):
            return value
        try:
            return cls(value)
        except ValueError:
            valid = ", ".join(t.value for t in cls)
            raise ValueError(f"unknown synthesis type {value!r} (expected one of: {valid})")


def all_types() -> tuple[SynthesisType, ...]:
    return (SynthesisType.PAPER_WISE, SynthesisType.METHODOLOGICAL, SynthesisType.THEMATIC)


@dataclass(frozen=True)
class CriterionDefinition:
    name: str
    question: str
    rating_descriptions: tuple[str, ...]  # ratings 1..5 in order


@dataclass(frozen=True)
class SynthesisPrompt:
    text: str
    synthesis_type: SynthesisType
    sample_id: str
    version: str


class PromptConfig:
    """Parsed prompt config: templates, type instructions, rating rubric."""

    def __init__(self, raw: dict, source: str = "prompt config"):
        try:
            self.version = str(raw["version"])
            self.part1: str = raw["synthesis"]["part1"]
            self.papers_header: str = raw["synthesis"]["papers_header"]
            self.type_instructions: dict[str, str] = dict(raw["type_instructions"])
            self.eval_intro: str = raw["evaluation"]["intro"]
            self.format_instruction: str = raw["evaluation"]["format_instruction"]
            self.format_instruction_single: str = raw["evaluation"]["format_instruction_single"]
            self.rating_labels: list[str] = list(raw["rating_labels"])
            criteria_raw = raw["criteria"]
        except (KeyError, TypeError) as exc:
            raise PromptConfigError(f"{source}: missing or malformed key: {exc}") from exc

        for t in all_types():
            if t.value not in self.type_instructions:
                raise PromptConfigError(f"{source}: missing instruction for type {t.value!r}")
        if len(self.rating_labels) != 5:
            raise PromptConfigError(f"{source}: rating_labels must have 5 entries")

        self.criteria: tuple[CriterionDefinition, ...] = tuple(
            CriterionDefinition(
                name=c["name"],
                question=" ".join(str(c["question"]).split()),
                rating_descriptions=tuple(" ".join(d.split()) for d in c["ratings"]),
            )
            for c in criteria_raw
        )
        if len(self.criteria) != 9:
            raise PromptConfigError(f"{source}: expected 9 criteria, got {len(self.criteria)}")
        names = [c.name for c in self.criteria]
        if len(set(names)) != 9:
            raise PromptConfigError(f"{source}: criterion names must be unique")
        for c in self.criteria:
            if len(c.rating_descriptions) != 5:
                raise PromptConfigError(
                    f"{source}: criterion {c.name!r} must have 5 rating descriptions"
                )
        self.criterion_names: tuple[str, ...] = tuple(names)

    def criterion(self, name: str) -> CriterionDefinition:
        for c in self.criteria:
            if c.name == name:
                return c
        raise KeyError(name)


def load_prompt_config(path: str | Path) -> PromptConfig:
    with open(path, encoding="utf-8") as fh:
        return PromptConfig(yaml.safe_load(fh), source=str(path))


@lru_cache(maxsize=1)
def default_prompt_config() -> PromptConfig:
    raw = yaml.safe_load(
        resources.files("synthkit").joinpath("data/prompts.yaml").read_text("utf-8")
    )
    return PromptConfig(raw, source="synthkit/data/prompts.yaml")


def instruction_for_type(
    synthesis_type: SynthesisType | str, config: PromptConfig | None = None
) -> str:
    """The fixed per-type task instruction string."""
    config = config or default_prompt_config()
    return config.type_instructions[SynthesisType.parse(synthesis_type).value]


def _paper_block(index: int, title: str, abstract: str) -> str:
    content = f"{title}. {abstract}"
    return f'{index}. "{content}"'


def _render_papers(papers, header: str) -> str:
    lines = [header]
    for i, paper in enumerate(papers, start=1):
        lines.append(_paper_block(i, paper.title, paper.abstract))
    return "\n".join(lines)


def _check_no_placeholders(text: str, context: str) -> None:
    for token in (PLACEHOLDER_PROBLEM, PLACEHOLDER_INSTRUCTION):
        if token in text:
            raise PromptConfigError(f"{context}: unreplaced placeholder {token}")
    leftover = PLACEHOLDER_CONTENT_RE.search(text)
    if leftover:
        raise PromptConfigError(f"{context}: unreplaced placeholder {leftover.group(0)}")


def build_synthesis_prompt(
    sample, synthesis_type: SynthesisType | str, config: PromptConfig | None = None
) -> SynthesisPrompt:
    """Assemble the two-part generation prompt for one sample and type."""
    config = config or default_prompt_config()
    stype = SynthesisType.parse(synthesis_type)
    part1 = config.part1.replace(PLACEHOLDER_PROBLEM, sample.research_problem).replace(
        PLACEHOLDER_INSTRUCTION, config.type_instructions[stype.value]
    )
    part2 = _render_papers(sample.papers, config.papers_header)
    text = f"{part1}\n\n{part2}"
    _check_no_placeholders(text, f"sample {sample.sample_id}")
    return SynthesisPrompt(
        text=text, synthesis_type=stype, sample_id=sample.sample_id, version=config.version
    )


def expand_prompts(samples, config: PromptConfig | None = None) -> list[SynthesisPrompt]:
    """All three prompt variants for every sample (3x expansion)."""
    config = config or default_prompt_config()
    return [build_synthesis_prompt(s, t, config) for s in samples for t in all_types()]


def _criterion_block(index: int, definition: CriterionDefinition, labels: list[str]) -> str:
    lines = [f"{index}. {definition.name.capitalize()}: {definition.question}"]
    for rating, (label, description) in enumerate(
        zip(labels, definition.rating_descriptions), start=1
    ):
        lines.append(f"Rating {rating}. {label}: {description}")
    return "\n".join(lines)


def build_evaluation_prompt(
    sample,
    synthesis_text: str,
    criterion: str | None = None,
    config: PromptConfig | None = None,
) -> str:
    """Assemble the rubric prompt scoring a synthesis on nine aspects.

    With ``criterion`` set, only that aspect is included and the reply
    contract shrinks to a single rating line (per-criterion mode).
    """
    if not synthesis_text or not synthesis_text.strip():
        raise ValueError("synthesis_text must be nonempty")
    config = config or default_prompt_config()

    if criterion is None:
        definitions = config.criteria
        format_instruction = config.format_instruction
    else:
        definitions = (config.criterion(criterion),)
        format_instruction = config.format_instruction_single

    blocks = [
        _criterion_block(i, d, config.rating_labels) for i, d in enumerate(definitions, start=1)
    ]
    parts = [
        config.eval_intro,
        f'Research problem: "{sample.research_problem}"',
        _render_papers(sample.papers, config.papers_header),
        f'Synthesis to evaluate:\n"{synthesis_text}"',
        "Aspects and rating scales:\n" + "\n\n".join(blocks),
        format_instruction,
    ]
    return "\n\n".join(parts)

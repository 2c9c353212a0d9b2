"""Reward arithmetic for synthesis generation.

Three reward layers: a structural reward over word count and the
paper-structure flag, a preferred-value reward over the nine criteria
scores, and a KL-penalized combination for policy training. Every constant
lives in :class:`RewardConfig` so experiments can move the knobs without
touching code; the defaults are the published values.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import Sequence

CRITERIA = (
    "relevancy",
    "correctness",
    "completeness",
    "informativeness",
    "integration",
    "cohesion",
    "coherence",
    "readability",
    "conciseness",
)


@dataclass(frozen=True)
class CriteriaScores:
    """The nine-dimensional integer score vector, each component in [1, 5]."""

    relevancy: int
    correctness: int
    completeness: int
    informativeness: int
    integration: int
    cohesion: int
    coherence: int
    readability: int
    conciseness: int

    def __post_init__(self):
        for name in CRITERIA:
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool):
                raise ValueError(f"{name} must be an integer, got {value!r}")
            if not 1 <= value <= 5:
                raise ValueError(f"{name} must be in [1, 5], got {value}")

    @classmethod
    def from_mapping(cls, mapping: dict) -> "CriteriaScores":
        missing = [c for c in CRITERIA if c not in mapping]
        if missing:
            raise ValueError(f"missing criteria: {', '.join(missing)}")
        extras = sorted(set(mapping) - set(CRITERIA))
        if extras:
            raise ValueError(f"unknown criteria: {', '.join(extras)}")
        return cls(**{c: mapping[c] for c in CRITERIA})

    def as_dict(self) -> dict[str, int]:
        return {c: getattr(self, c) for c in CRITERIA}

    def values(self) -> tuple[int, ...]:
        return tuple(getattr(self, c) for c in CRITERIA)


@dataclass(frozen=True)
class CaseRewards:
    short: float = -1.5
    long: float = -1.0
    structured: float = -2.0
    near_limit: float = -0.5
    ok: float = 2.0


@dataclass(frozen=True)
class RewardConfig:
    """All reward constants; defaults are the published values."""

    preferred_value: int = 5
    gpt4_threshold: float = -0.125
    gpt4_bonus: float = 4.0
    kl_coefficient: float = 0.2
    min_words: int = 50
    word_limit: int = 200
    band_halfwidth: int = 20
    case_rewards: CaseRewards = field(default_factory=CaseRewards)

    def __post_init__(self):
        if not 1 <= self.preferred_value <= 5:
            raise ValueError(f"preferred_value must be in [1, 5], got {self.preferred_value}")
        if self.kl_coefficient < 0:
            raise ValueError("kl_coefficient must be >= 0")
        if not 0 < self.min_words <= self.word_limit:
            raise ValueError("word band edges must be positive and ordered")
        if self.band_halfwidth < 0:
            raise ValueError("band_halfwidth must be >= 0")

    @classmethod
    def from_mapping(cls, mapping: dict) -> "RewardConfig":
        data = dict(mapping)
        cases = data.pop("case_rewards", None)
        if cases is not None:
            data["case_rewards"] = CaseRewards(**cases)
        return cls(**data)

    def as_dict(self) -> dict:
        return asdict(self)


def r_basic(
    word_count: int, is_paper_structured: bool, config: RewardConfig | None = None
) -> float:
    """Structural reward over word count and the paper-structure flag.

    Cases evaluate first-match in their published order, so an overlong
    structured text is scored for length, not structure.
    """
    config = config or RewardConfig()
    cases = config.case_rewards
    if word_count < config.min_words:
        return cases.short
    if word_count > config.word_limit:
        return cases.long
    if is_paper_structured:
        return cases.structured
    if abs(word_count - config.word_limit) <= config.band_halfwidth:
        return cases.near_limit
    return cases.ok


def r_basic_case(
    word_count: int, is_paper_structured: bool, config: RewardConfig | None = None
) -> str:
    """Name of the first matching case, for diagnostics."""
    config = config or RewardConfig()
    if word_count < config.min_words:
        return "short"
    if word_count > config.word_limit:
        return "long"
    if is_paper_structured:
        return "structured"
    if abs(word_count - config.word_limit) <= config.band_halfwidth:
        return "near_limit"
    return "ok"


def pvf_score(scores: CriteriaScores, pv: int = 5) -> float:
    """Negated mean absolute distance of the nine scores from ``pv``.

    Ranges over [-4, 0]; 0 iff every component equals the preferred value.
    """
    values = scores.values()
    return -sum(abs(v - pv) for v in values) / len(values)


def r_gpt4(scores: CriteriaScores, config: RewardConfig | None = None) -> float:
    """Criteria-based reward: a fixed bonus near the preferred value, the raw
    preferred-value score otherwise."""
    config = config or RewardConfig()
    pvf = pvf_score(scores, config.preferred_value)
    if pvf >= config.gpt4_threshold:
        return config.gpt4_bonus
    return pvf


def kl_per_token(
    policy_logprobs: Sequence[float], base_logprobs: Sequence[float]
) -> list[float]:
    """Per-token log-ratio contributions; both sequences must align."""
    if len(policy_logprobs) != len(base_logprobs):
        raise ValueError(
            f"logprob length mismatch: {len(policy_logprobs)} vs {len(base_logprobs)}"
        )
    return [p - b for p, b in zip(policy_logprobs, base_logprobs)]


def kl_term(
    policy_logprobs: Sequence[float], base_logprobs: Sequence[float]
) -> float:
    """Sequence-level log-ratio of the tuned policy against the frozen base.

    Equals log of the policy-probability ratio for the whole sequence, i.e.
    the sum of per-token log-probability differences.
    """
    return sum(kl_per_token(policy_logprobs, base_logprobs))


def penalized_reward(base_reward: float, kl: float, lam: float) -> float:
    """KL-penalized reward: ``base_reward - lam * kl``."""
    if lam < 0:
        raise ValueError("lam must be >= 0")
    return base_reward - lam * kl

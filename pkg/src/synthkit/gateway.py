"""Chat-completion client for synthesis generation and nine-aspect evaluation.

Two interchangeable backends: an HTTP backend speaking the standard
``/chat/completions`` wire protocol, and a replay backend mapping prompt
digests to canned completions so the whole suite runs with zero network
access. Credentials come from an environment variable named in the config,
never from files.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import httpx

from .prompting import SynthesisPrompt, build_evaluation_prompt, PromptConfig
from .rewards import CRITERIA, CriteriaScores

logger = logging.getLogger(__name__)

Messages = list[dict]


class GatewayError(RuntimeError):
    """Base class for gateway failures."""


class TransportError(GatewayError):
    """Endpoint unreachable or persistently failing after retries."""

    def __init__(self, message: str, attempts: int = 1):
        self.attempts = attempts
        super().__init__(message)


class EmptyCompletionError(GatewayError):
    """The endpoint returned an empty assistant message."""


class ReplayMissError(GatewayError):
    """No canned completion recorded for the requested prompt digest."""


class ScoreParseError(GatewayError):
    """Evaluator reply could not be parsed into nine valid scores."""


@dataclass(frozen=True)
class GatewayConfig:
    """Endpoint, model and client behavior for one chat-completion target."""

    model: str = "gpt-4-1106-preview"
    base_url: str = "https://api.openai.com/v1"
    api_key_env: str = "OPENAI_API_KEY"
    temperature: float | None = None
    max_retries: int = 3
    timeout_s: float = 60.0
    parallelism: int = 4
    backend: str = "http"
    replay_path: str | None = None

    def __post_init__(self):
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")
        if self.backend not in ("http", "replay"):
            raise ValueError(f"unknown backend {self.backend!r}")

    @classmethod
    def from_mapping(cls, mapping: dict) -> "GatewayConfig":
        return cls(**mapping)


@dataclass(frozen=True)
class SynthesisRecord:
    """One generated synthesis with its verbatim raw response."""

    sample_id: str
    synthesis_type: str
    model: str
    raw_response: str
    synthesis_text: str
    prompt_version: str
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "synthesis_type": self.synthesis_type,
            "model": self.model,
            "raw_response": self.raw_response,
            "synthesis_text": self.synthesis_text,
            "prompt_version": self.prompt_version,
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "SynthesisRecord":
        return cls(
            sample_id=raw["sample_id"],
            synthesis_type=raw["synthesis_type"],
            model=raw["model"],
            raw_response=raw["raw_response"],
            synthesis_text=raw["synthesis_text"],
            prompt_version=raw.get("prompt_version", "unversioned"),
            metadata=raw.get("metadata", {}),
        )

    def key(self) -> str:
        return f"{self.model}::{self.synthesis_type}::{self.sample_id}"


def prompt_digest(messages: Messages) -> str:
    """Stable digest of a chat request, used as the replay fixture key."""
    canon = json.dumps(messages, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


class HttpBackend:
    """Chat-completion endpoint client with bounded retries."""

    def __init__(self, config: GatewayConfig):
        self.config = config
        self._client = httpx.Client(timeout=config.timeout_s)

    @property
    def name(self) -> str:
        return f"http:{self.config.base_url}"

    def complete(self, messages: Messages) -> str:
        cfg = self.config
        payload: dict = {"model": cfg.model, "messages": messages}
        if cfg.temperature is not None:
            payload["temperature"] = cfg.temperature
        headers = {}
        api_key = os.environ.get(cfg.api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"

        attempts = cfg.max_retries + 1
        last_error: Exception | None = None
        for attempt in range(attempts):
            try:
                response = self._client.post(
                    cfg.base_url.rstrip("/") + "/chat/completions",
                    json=payload,
                    headers=headers,
                )
                response.raise_for_status()
                body = response.json()
                return body["choices"][0]["message"]["content"] or ""
            except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
                last_error = exc
                logger.warning(
                    "chat request attempt %d/%d failed: %r", attempt + 1, attempts, exc
                )
                if attempt + 1 < attempts:
                    time.sleep(min(2**attempt, 8))
        raise TransportError(
            f"chat request failed after {attempts} attempts: {last_error!r}",
            attempts=attempts,
        )

    def close(self):
        self._client.close()


class ReplayBackend:
    """Deterministic offline backend: prompt digest -> canned completion."""

    def __init__(self, fixtures: dict[str, str], name: str = "replay"):
        self._fixtures = dict(fixtures)
        self._name = name

    @property
    def name(self) -> str:
        return self._name

    @classmethod
    def from_file(cls, path: str | Path) -> "ReplayBackend":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(raw, dict):
            raise ValueError(f"{path}: replay fixture must be a digest->completion object")
        return cls(raw, name=f"replay:{path}")

    def complete(self, messages: Messages) -> str:
        digest = prompt_digest(messages)
        try:
            return self._fixtures[digest]
        except KeyError:
            raise ReplayMissError(f"no canned completion for digest {digest}") from None


Backend = HttpBackend | ReplayBackend


def make_backend(config: GatewayConfig):
    if config.backend == "replay":
        if not config.replay_path:
            raise ValueError("replay backend requires replay_path")
        return ReplayBackend.from_file(config.replay_path)
    return HttpBackend(config)


def generate(
    prompt: SynthesisPrompt, config: GatewayConfig, backend=None
) -> SynthesisRecord:
    """Send one generation prompt and wrap the reply as a SynthesisRecord."""
    backend = backend or make_backend(config)
    raw = backend.complete([{"role": "user", "content": prompt.text}])
    text = (raw or "").strip()
    if not text:
        raise EmptyCompletionError(
            f"empty completion for sample {prompt.sample_id} ({prompt.synthesis_type.value})"
        )
    return SynthesisRecord(
        sample_id=prompt.sample_id,
        synthesis_type=prompt.synthesis_type.value,
        model=config.model,
        raw_response=raw,
        synthesis_text=text,
        prompt_version=prompt.version,
        metadata={"backend": backend.name, "temperature": config.temperature},
    )


def generate_many(
    prompts: Iterable[SynthesisPrompt],
    config: GatewayConfig,
    backend=None,
    on_result: Callable | None = None,
) -> list[tuple[SynthesisPrompt, SynthesisRecord | None, Exception | None]]:
    """Generate a batch concurrently, bounded by the parallelism limit.

    Results keep the input prompt order; per-prompt failures are returned,
    not raised, so one bad record never aborts a batch.
    """
    backend = backend or make_backend(config)
    prompts = list(prompts)
    results: list = [None] * len(prompts)

    def run_one(index: int, prompt: SynthesisPrompt):
        try:
            return index, generate(prompt, config, backend), None
        except Exception as exc:
            return index, None, exc

    with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
        futures = [pool.submit(run_one, i, p) for i, p in enumerate(prompts)]
        for future in as_completed(futures):
            index, record, error = future.result()
            results[index] = (prompts[index], record, error)
            if on_result is not None:
                on_result(prompts[index], record, error)
    return results


_FENCE_RE = re.compile(r"```[^\n`]*\n(.*?)```", re.DOTALL)


def parse_scores(raw: str) -> CriteriaScores:
    """Parse the fenced ``name: rating`` block demanded by the rubric prompt.

    Tolerates key case and ordering; rejects duplicates, unknown keys,
    non-integer values, out-of-range ratings and missing criteria.
    """
    matches = _FENCE_RE.findall(raw or "")
    if not matches:
        raise ScoreParseError("no fenced score block found in evaluator reply")
    block = matches[0]

    parsed: dict[str, int] = {}
    for line in block.splitlines():
        line = line.strip()
        if not line:
            continue
        if ":" not in line:
            raise ScoreParseError(f"unparseable score line: {line!r}")
        key, _, value = line.partition(":")
        key = key.strip().lower()
        if key not in CRITERIA:
            raise ScoreParseError(f"unknown criterion key: {key!r}")
        if key in parsed:
            raise ScoreParseError(f"duplicate criterion key: {key!r}")
        value = value.strip()
        try:
            score = int(value)
        except ValueError:
            raise ScoreParseError(f"non-integer rating for {key!r}: {value!r}") from None
        if not 1 <= score <= 5:
            raise ScoreParseError(f"rating out of range for {key!r}: {score}")
        parsed[key] = score

    missing = [c for c in CRITERIA if c not in parsed]
    if missing:
        raise ScoreParseError(f"missing criteria in evaluator reply: {', '.join(missing)}")
    return CriteriaScores.from_mapping(parsed)


def parse_single_score(raw: str, criterion: str) -> int:
    """Parse a one-line fenced rating from per-criterion mode."""
    matches = _FENCE_RE.findall(raw or "")
    if not matches:
        raise ScoreParseError("no fenced score block found in evaluator reply")
    lines = [ln.strip() for ln in matches[0].splitlines() if ln.strip()]
    if len(lines) != 1:
        raise ScoreParseError(f"expected a single rating line, got {len(lines)}")
    key, _, value = lines[0].partition(":")
    if key.strip().lower() != criterion:
        raise ScoreParseError(f"expected key {criterion!r}, got {key.strip()!r}")
    try:
        score = int(value.strip())
    except ValueError:
        raise ScoreParseError(f"non-integer rating: {value.strip()!r}") from None
    if not 1 <= score <= 5:
        raise ScoreParseError(f"rating out of range for {criterion!r}: {score}")
    return score


def render_scores(scores: CriteriaScores) -> str:
    """Canonical fenced block for a score vector (parse_scores inverse)."""
    lines = "\n".join(f"{name}: {getattr(scores, name)}" for name in CRITERIA)
    return f"```\n{lines}\n```"


def evaluate(
    sample,
    record: SynthesisRecord,
    config: GatewayConfig,
    backend=None,
    per_criterion: bool = False,
    prompt_config: PromptConfig | None = None,
) -> CriteriaScores:
    """Score one synthesis on the nine aspects via the evaluator endpoint."""
    backend = backend or make_backend(config)
    if not per_criterion:
        prompt = build_evaluation_prompt(sample, record.synthesis_text, config=prompt_config)
        raw = backend.complete([{"role": "user", "content": prompt}])
        return parse_scores(raw)

    values: dict[str, int] = {}
    for criterion in CRITERIA:
        prompt = build_evaluation_prompt(
            sample, record.synthesis_text, criterion=criterion, config=prompt_config
        )
        raw = backend.complete([{"role": "user", "content": prompt}])
        values[criterion] = parse_single_score(raw, criterion)
    return CriteriaScores.from_mapping(values)

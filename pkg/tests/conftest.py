"""Shared fixtures: sample builders, funnel fixtures and mock backends."""

from __future__ import annotations

import json
import random
import threading

import pytest

from synthkit.corpus import Comparison, Paper, SynthesisSample
from synthkit.gateway import prompt_digest


def make_paper(tag: str, with_abstract: bool = True, doi: bool = True) -> Paper:
    return Paper(
        title=f"Study {tag}",
        abstract=f"Findings for {tag} with enough detail to count." if with_abstract else "",
        doi=f"10.1000/{tag}" if doi else None,
    )


def make_comparison(
    cid: str,
    n_papers: int = 5,
    n_without_abstract: int = 0,
    field: str = "Computer Sciences",
    problem: str | None = None,
) -> Comparison:
    papers = [
        make_paper(f"{cid}-p{i}", with_abstract=i >= n_without_abstract)
        for i in range(n_papers)
    ]
    return Comparison(
        comparison_id=cid,
        research_field_original=field,
        research_field_level3=field,
        research_problem=problem or f"problem for {cid}",
        papers=tuple(papers),
    )


def make_sample(
    sid: str,
    field: str = "Computer Sciences",
    problem: str | None = None,
    comparison_id: str | None = None,
) -> SynthesisSample:
    return SynthesisSample(
        sample_id=sid,
        comparison_id=comparison_id or sid,
        research_problem=problem or f"problem for {sid}",
        research_field_level3=field,
        papers=tuple(make_paper(f"{sid}-p{i}") for i in range(5)),
    )


@pytest.fixture
def sample():
    return make_sample("S-unit")


def write_corpus_file(tmp_path, records: list[dict], name: str = "corpus.jsonl"):
    path = tmp_path / name
    path.write_text("\n".join(json.dumps(r) for r in records) + "\n", encoding="utf-8")
    return path


def comparison_record(cid: str, n_papers: int = 5, **overrides) -> dict:
    record = {
        "sample_id": cid,
        "research_field_original": "Computer Sciences",
        "research_field_level3": "Computer Sciences",
        "research_problem": f"problem for {cid}",
        "papers": [
            {
                "title": f"Study {cid}-p{i}",
                "abstract": f"Abstract text for {cid}-p{i}.",
                "doi": f"10.1000/{cid}-p{i}",
            }
            for i in range(n_papers)
        ],
    }
    record.update(overrides)
    return record


class CountingBackend:
    """Deterministic mock backend that counts completion requests."""

    name = "mock:counting"

    def __init__(self, reply=None):
        self.requests = 0
        self._lock = threading.Lock()
        self._reply = reply

    def complete(self, messages):
        with self._lock:
            self.requests += 1
        if self._reply is not None:
            return self._reply(messages)
        return f"synthetic completion {prompt_digest(messages)[:12]}"


class FlakyBackend:
    """Fails the first ``failures`` calls, then delegates."""

    name = "mock:flaky"

    def __init__(self, inner, failures: int):
        self.inner = inner
        self.failures = failures
        self.calls = 0

    def complete(self, messages):
        self.calls += 1
        if self.calls <= self.failures:
            raise RuntimeError("transient failure")
        return self.inner.complete(messages)


class SeededScoreBackend:
    """Evaluator mock: digest-seeded scores that vary across repeat calls.

    Re-instantiating with the same seed reproduces the exact sequence.
    """

    name = "mock:seeded-scores"

    def __init__(self, seed: int = 0):
        self.seed = seed
        self._calls: dict[str, int] = {}
        self._lock = threading.Lock()

    def complete(self, messages):
        digest = prompt_digest(messages)
        with self._lock:
            call_index = self._calls.get(digest, 0)
            self._calls[digest] = call_index + 1
        rng = random.Random(f"{self.seed}:{digest}:{call_index}")
        from synthkit.rewards import CRITERIA

        lines = "\n".join(f"{c}: {rng.randint(3, 5)}" for c in CRITERIA)
        return f"```\n{lines}\n```"

"""Corpus ingestion and preparation for synthesis generation.

The pipeline mirrors the data-release funnel: load line-delimited comparison
records, keep only comparisons with enough abstract-bearing papers, expand
each comparison into all five-paper collections, collapse duplicates that
differ only in research field, and split the result into test / train-llm /
train-rl partitions stratified by research field.
"""

from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

logger = logging.getLogger(__name__)

COLLECTION_SIZE = 5


class MalformedRecordError(ValueError):
    """A corpus record that violates the documented format."""

    def __init__(self, message: str, record_index: int | None = None, source: str = ""):
        self.record_index = record_index
        self.source = source
        where = f"{source or 'corpus'}"
        if record_index is not None:
            where += f", record {record_index}"
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class Paper:
    title: str
    abstract: str
    doi: str | None = None

    def key(self) -> tuple[str, str | None]:
        return (self.title, self.doi)


@dataclass(frozen=True)
class Comparison:
    comparison_id: str
    research_field_original: str
    research_field_level3: str
    research_problem: str
    papers: tuple[Paper, ...]

    def eligible_papers(self) -> tuple[Paper, ...]:
        """Papers usable as synthesis context (nonempty abstract)."""
        return tuple(p for p in self.papers if p.abstract.strip())


@dataclass(frozen=True)
class SynthesisSample:
    """One research problem plus exactly five abstract-bearing papers."""

    sample_id: str
    comparison_id: str
    research_problem: str
    research_field_level3: str
    papers: tuple[Paper, ...]

    def __post_init__(self):
        if len(self.papers) != COLLECTION_SIZE:
            raise ValueError(
                f"sample {self.sample_id}: expected {COLLECTION_SIZE} papers, got {len(self.papers)}"
            )
        for p in self.papers:
            if not p.abstract.strip():
                raise ValueError(f"sample {self.sample_id}: paper without abstract: {p.title!r}")

    def content_key(self) -> tuple:
        """Identity of everything except the research field."""
        return (
            self.research_problem,
            tuple((p.title, p.abstract, p.doi) for p in self.papers),
        )


@dataclass
class DatasetSplit:
    train_llm: list[SynthesisSample]
    train_rl: list[SynthesisSample]
    test: list[SynthesisSample]
    seed: int

    def comparison_ids(self, part: str) -> list[str]:
        samples = getattr(self, part)
        seen: dict[str, None] = {}
        for s in samples:
            seen.setdefault(s.comparison_id, None)
        return list(seen)

    def to_manifest(self) -> dict:
        return {
            "seed": self.seed,
            "test": [s.sample_id for s in self.test],
            "train_llm": [s.sample_id for s in self.train_llm],
            "train_rl": [s.sample_id for s in self.train_rl],
        }


def _parse_paper(raw: dict, record_index: int, source: str) -> Paper:
    title = (raw.get("title") or "").strip()
    if not title:
        raise MalformedRecordError("paper without title", record_index, source)
    abstract = (raw.get("abstract") or "").strip()
    doi = raw.get("doi") or None
    return Paper(title=title, abstract=abstract, doi=doi)


def parse_comparison(raw: dict, record_index: int = 0, source: str = "") -> tuple[Comparison, int]:
    """Parse one record; returns the comparison and the dropped-paper count."""
    cid = raw.get("comparison_id") or raw.get("sample_id")
    if not cid:
        raise MalformedRecordError("missing comparison_id/sample_id", record_index, source)
    problem = (raw.get("research_problem") or "").strip()
    if not problem:
        raise MalformedRecordError("missing research_problem", record_index, source)
    papers_raw = raw.get("papers")
    if not isinstance(papers_raw, list) or not papers_raw:
        raise MalformedRecordError("papers must be a nonempty list", record_index, source)

    papers: list[Paper] = []
    seen_keys: set[tuple] = set()
    dropped = 0
    for p_raw in papers_raw:
        if not isinstance(p_raw, dict):
            raise MalformedRecordError("paper entry must be an object", record_index, source)
        paper = _parse_paper(p_raw, record_index, source)
        if not paper.abstract:
            dropped += 1
            continue
        if paper.key() in seen_keys:
            continue
        seen_keys.add(paper.key())
        papers.append(paper)

    comparison = Comparison(
        comparison_id=str(cid),
        research_field_original=str(raw.get("research_field_original") or "unknown"),
        research_field_level3=str(raw.get("research_field_level3") or "unknown"),
        research_problem=problem,
        papers=tuple(papers),
    )
    return comparison, dropped


def load_corpus(path: str | Path) -> list[Comparison]:
    """Load line-delimited comparison records from ``path``.

    Papers with empty abstracts are dropped (counted and logged); any record
    that violates the format raises :class:`MalformedRecordError` naming the
    record index.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise MalformedRecordError(f"unreadable file: {exc}", source=str(path)) from exc
    return _load_corpus_lines(text.splitlines(), source=str(path))


def _load_corpus_lines(lines, source: str) -> list[Comparison]:
    comparisons: list[Comparison] = []
    dropped_total = 0
    for index, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecordError(f"invalid JSON: {exc}", index, source) from exc
        comparison, dropped = parse_comparison(raw, index, source)
        dropped_total += dropped
        comparisons.append(comparison)
    if dropped_total:
        logger.warning("%s: dropped %d papers without abstracts", source, dropped_total)
    return comparisons


def bundled_corpus_path() -> Path:
    """Filesystem path of the corpus file shipped with the package."""
    return Path(str(resources.files("synthkit").joinpath("data/corpus.jsonl")))


def load_bundled_corpus() -> list[Comparison]:
    text = resources.files("synthkit").joinpath("data/corpus.jsonl").read_text("utf-8")
    return _load_corpus_lines(text.splitlines(), source="synthkit/data/corpus.jsonl")


def filter_min_unique_papers(comparisons: list[Comparison], k: int) -> list[Comparison]:
    """Keep comparisons with at least ``k`` unique abstract-bearing papers."""
    if k < 1:
        raise ValueError("k must be >= 1")
    kept = []
    for c in comparisons:
        unique = {p.key() for p in c.eligible_papers()}
        if len(unique) >= k:
            kept.append(c)
    return kept


def iter_k_subsets(n: int, k: int):
    """All k-subsets of range(n) as index tuples, in lexicographic order."""
    if k > n:
        return
    indices = list(range(k))
    while True:
        yield tuple(indices)
        for i in reversed(range(k)):
            if indices[i] != i + n - k:
                break
        else:
            return
        indices[i] += 1
        for j in range(i + 1, k):
            indices[j] = indices[j - 1] + 1


def _unrank_subset(n: int, k: int, rank: int) -> tuple[int, ...]:
    # Lexicographic unranking: walk candidate elements, spending C(n-x-1, k-left-1)
    # ranks for each element skipped.
    subset = []
    x = 0
    remaining = k
    while remaining:
        count = math.comb(n - x - 1, remaining - 1)
        if rank < count:
            subset.append(x)
            remaining -= 1
        else:
            rank -= count
        x += 1
    return tuple(subset)


def enumerate_collections(
    comparison: Comparison,
    k: int = COLLECTION_SIZE,
    cap: int | None = None,
    seed: int = 0,
) -> list[SynthesisSample]:
    """Expand a comparison into all k-subsets of its eligible papers.

    Subsets come out in deterministic lexicographic order. When ``cap`` is
    set and the full count exceeds it, a seeded uniform subsample of exactly
    ``cap`` subsets is returned instead (still in lexicographic order).
    """
    if k != COLLECTION_SIZE:
        raise ValueError(f"synthesis samples hold exactly {COLLECTION_SIZE} papers; got k={k}")
    if cap is not None and cap < 1:
        raise ValueError("cap must be >= 1")
    papers = comparison.eligible_papers()
    n = len(papers)
    if n < k:
        raise ValueError(
            f"comparison {comparison.comparison_id}: needs >= {k} papers with abstracts, has {n}"
        )

    total = math.comb(n, k)
    if cap is not None and total > cap:
        ranks = sorted(random.Random(seed).sample(range(total), cap))
        subsets = [_unrank_subset(n, k, r) for r in ranks]
    else:
        subsets = list(iter_k_subsets(n, k))

    samples = []
    single = len(subsets) == 1 and total == 1
    for i, subset in enumerate(subsets):
        sample_id = comparison.comparison_id if single else f"{comparison.comparison_id}-c{i:04d}"
        samples.append(
            SynthesisSample(
                sample_id=sample_id,
                comparison_id=comparison.comparison_id,
                research_problem=comparison.research_problem,
                research_field_level3=comparison.research_field_level3,
                papers=tuple(papers[j] for j in subset),
            )
        )
    return samples


def dedup_multifield(samples: list[SynthesisSample], seed: int = 0) -> list[SynthesisSample]:
    """Collapse groups of samples identical except for research field.

    One representative per group, drawn uniformly with the given seed;
    deterministic for a fixed seed and input order.
    """
    groups: dict[tuple, list[int]] = {}
    for i, sample in enumerate(samples):
        groups.setdefault(sample.content_key(), []).append(i)

    rng = random.Random(seed)
    survivors = set()
    for key in groups:
        members = groups[key]
        survivors.add(members[rng.randrange(len(members))])
    return [s for i, s in enumerate(samples) if i in survivors]


def split_dataset(
    samples: list[SynthesisSample], test_fraction: float, seed: int = 0
) -> DatasetSplit:
    """Stratified comparison-level split into test / train-llm / train-rl.

    Stratification runs per research field at comparison granularity with
    round-half-up test counts; single-comparison strata go wholly to train.
    The remaining train comparisons are halved into the two train partitions
    by a seeded draw.
    """
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must be in (0, 1)")

    by_comparison: dict[str, list[SynthesisSample]] = {}
    comparison_field: dict[str, str] = {}
    for s in samples:
        by_comparison.setdefault(s.comparison_id, []).append(s)
        comparison_field[s.comparison_id] = s.research_field_level3

    strata: dict[str, list[str]] = {}
    for cid in by_comparison:
        strata.setdefault(comparison_field[cid], []).append(cid)

    rng = random.Random(seed)
    test_cids: list[str] = []
    train_cids: list[str] = []
    for fld in sorted(strata):
        cids = sorted(strata[fld])
        if len(cids) == 1:
            logger.info("stratum %r has a single comparison; assigned to train", fld)
            train_cids.extend(cids)
            continue
        n_test = int(len(cids) * test_fraction + 0.5)
        rng.shuffle(cids)
        test_cids.extend(cids[:n_test])
        train_cids.extend(cids[n_test:])

    train_cids = sorted(train_cids)
    rng.shuffle(train_cids)
    n_llm = (len(train_cids) + 1) // 2
    llm_cids = set(train_cids[:n_llm])
    rl_cids = set(train_cids[n_llm:])
    test_set = set(test_cids)

    def collect(cid_set: set[str]) -> list[SynthesisSample]:
        return [s for s in samples if s.comparison_id in cid_set]

    return DatasetSplit(
        train_llm=collect(llm_cids),
        train_rl=collect(rl_cids),
        test=collect(test_set),
        seed=seed,
    )


def domain_stats(samples: list[SynthesisSample]) -> list[tuple[str, int]]:
    """Per-field sample counts, sorted by descending count then field name."""
    counts: dict[str, int] = {}
    for s in samples:
        counts[s.research_field_level3] = counts.get(s.research_field_level3, 0) + 1
    return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))


def standard_pipeline(
    comparisons: list[Comparison],
    seed: int = 0,
    cap: int | None = None,
) -> list[SynthesisSample]:
    """filter -> enumerate -> dedup with the standard five-paper threshold."""
    eligible = filter_min_unique_papers(comparisons, COLLECTION_SIZE)
    samples: list[SynthesisSample] = []
    for c in eligible:
        samples.extend(enumerate_collections(c, COLLECTION_SIZE, cap=cap, seed=seed))
    return dedup_multifield(samples, seed=seed)


def write_split_manifest(split: DatasetSplit, path: str | Path) -> None:
    Path(path).write_text(json.dumps(split.to_manifest(), indent=2) + "\n", encoding="utf-8")

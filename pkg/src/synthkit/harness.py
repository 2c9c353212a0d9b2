"""Batch orchestration and reporting over generation and evaluation runs.

Generation fans out one request per (sample, type) and persists records
grouped by (model, type); evaluation repeats the nine-aspect scoring a
configurable number of times per record. Aggregation folds runs into
per-criterion means, word-count bucket percentages and structure rates;
the consistency report measures evaluator spread across repeated runs.
"""

from __future__ import annotations

import json
import logging
import re
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Mapping

from .gateway import GatewayConfig, SynthesisRecord, evaluate, generate_many, make_backend
from .prompting import PromptConfig, SynthesisType, build_synthesis_prompt, default_prompt_config
from .rewards import CRITERIA, CriteriaScores
from .structure import PatternConfig, StructureReport, analyze

logger = logging.getLogger(__name__)

# Word-count buckets for reporting; the middle band is inclusive both ends.
BUCKETS = ("wc_lt_50", "wc_50_150", "wc_150_250", "wc_gt_250")

EPOCH_CLOCK = "1970-01-01T00:00:00+00:00"


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def fixed_clock() -> str:
    return EPOCH_CLOCK


def wc_bucket(word_count: int) -> str:
    """Exclusive, exhaustive bucket assignment for nonnegative word counts."""
    if word_count < 50:
        return "wc_lt_50"
    if word_count < 150:
        return "wc_50_150"
    if word_count <= 250:
        return "wc_150_250"
    return "wc_gt_250"


@dataclass(frozen=True)
class EvaluationRun:
    """One scoring pass of one record by the evaluator."""

    run_index: int
    record_key: str
    sample_id: str
    synthesis_type: str
    model: str  # generator model of the scored record
    domain: str
    scores: CriteriaScores
    evaluator_model: str
    timestamp: str

    def to_dict(self) -> dict:
        return {
            "run_index": self.run_index,
            "record_key": self.record_key,
            "sample_id": self.sample_id,
            "synthesis_type": self.synthesis_type,
            "model": self.model,
            "domain": self.domain,
            "scores": self.scores.as_dict(),
            "evaluator_model": self.evaluator_model,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "EvaluationRun":
        return cls(
            run_index=raw["run_index"],
            record_key=raw["record_key"],
            sample_id=raw["sample_id"],
            synthesis_type=raw["synthesis_type"],
            model=raw["model"],
            domain=raw.get("domain", "unknown"),
            scores=CriteriaScores.from_mapping(raw["scores"]),
            evaluator_model=raw["evaluator_model"],
            timestamp=raw["timestamp"],
        )


@dataclass
class AggregateReport:
    group: dict[str, str]
    criterion_means: dict[str, float]
    bucket_percentages: dict[str, float]
    mean_word_count: float
    paper_structure_pct: float
    record_count: int
    run_count: int

    def to_dict(self) -> dict:
        return {
            "group": self.group,
            "criterion_means": self.criterion_means,
            "bucket_percentages": self.bucket_percentages,
            "mean_word_count": self.mean_word_count,
            "paper_structure_pct": self.paper_structure_pct,
            "record_count": self.record_count,
            "run_count": self.run_count,
        }


def _slug(value: str) -> str:
    return re.sub(r"[^\w.-]+", "-", value).strip("-")


def run_generation(
    samples,
    types: Iterable[SynthesisType | str],
    config: GatewayConfig,
    out_dir: str | Path,
    backend=None,
    prompt_config: PromptConfig | None = None,
) -> dict:
    """Generate one record per (sample, type) and persist grouped by type.

    Per-record failures are collected into the manifest; the run continues.
    """
    samples = list(samples)
    if not samples:
        raise ValueError("no samples to generate from")
    prompt_config = prompt_config or default_prompt_config()
    types = [SynthesisType.parse(t) for t in types]
    backend = backend or make_backend(config)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    prompts = [build_synthesis_prompt(s, t, prompt_config) for s in samples for t in types]
    results = generate_many(prompts, config, backend)

    by_type: dict[str, list[SynthesisRecord]] = {t.value: [] for t in types}
    failures = []
    for prompt, record, error in results:
        if error is not None:
            failures.append(
                {
                    "sample_id": prompt.sample_id,
                    "synthesis_type": prompt.synthesis_type.value,
                    "error": str(error),
                }
            )
            continue
        by_type[record.synthesis_type].append(record)

    files = {}
    for type_name, records in by_type.items():
        filename = f"{_slug(config.model)}__{type_name}.jsonl"
        path = out_dir / filename
        with open(path, "w", encoding="utf-8") as fh:
            for record in records:
                fh.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")
        files[type_name] = filename

    manifest = {
        "model": config.model,
        "prompt_version": prompt_config.version,
        "requested": len(prompts),
        "succeeded": len(prompts) - len(failures),
        "failed": len(failures),
        "failures": sorted(failures, key=lambda f: (f["sample_id"], f["synthesis_type"])),
        "files": files,
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return manifest


def read_records(paths: Iterable[str | Path]) -> list[SynthesisRecord]:
    """Read record JSONL files; directories are expanded to their *.jsonl."""
    files: list[Path] = []
    for p in paths:
        p = Path(p)
        if p.is_dir():
            files.extend(sorted(p.glob("*.jsonl")))
        else:
            files.append(p)
    records = []
    for f in files:
        for line in f.read_text(encoding="utf-8").splitlines():
            if line.strip():
                records.append(SynthesisRecord.from_dict(json.loads(line)))
    return records


def run_evaluation(
    records: Iterable[SynthesisRecord],
    samples_by_id: Mapping[str, object],
    runs: int,
    config: GatewayConfig,
    backend=None,
    prompt_config: PromptConfig | None = None,
    clock: Callable[[], str] | None = None,
) -> tuple[list[EvaluationRun], list[dict]]:
    """Score every record ``runs`` times; failures are reported, not raised.

    Requests run concurrently up to the gateway parallelism limit; results
    come back in (record, run_index) order regardless of completion order.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    backend = backend or make_backend(config)
    if clock is None:
        clock = fixed_clock if config.backend == "replay" else utc_now

    failures: list[dict] = []
    tasks: list[tuple[SynthesisRecord, object, int]] = []
    for record in records:
        sample = samples_by_id.get(record.sample_id)
        if sample is None:
            failures.append(
                {"record_key": record.key(), "run_index": None, "error": "sample not found"}
            )
            continue
        for run_index in range(1, runs + 1):
            tasks.append((record, sample, run_index))

    def run_one(task):
        record, sample, run_index = task
        try:
            scores = evaluate(sample, record, config, backend, prompt_config=prompt_config)
        except Exception as exc:
            return {"record_key": record.key(), "run_index": run_index, "error": str(exc)}
        return EvaluationRun(
            run_index=run_index,
            record_key=record.key(),
            sample_id=record.sample_id,
            synthesis_type=record.synthesis_type,
            model=record.model,
            domain=getattr(sample, "research_field_level3", "unknown"),
            scores=scores,
            evaluator_model=config.model,
            timestamp=clock(),
        )

    results: list[EvaluationRun] = []
    with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
        for outcome in pool.map(run_one, tasks):
            if isinstance(outcome, EvaluationRun):
                results.append(outcome)
            else:
                failures.append(outcome)
    return results, failures


def write_runs(runs: Iterable[EvaluationRun], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for run in runs:
            fh.write(json.dumps(run.to_dict(), sort_keys=True) + "\n")


def read_runs(path: str | Path) -> list[EvaluationRun]:
    runs = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            runs.append(EvaluationRun.from_dict(json.loads(line)))
    return runs


def structure_reports(
    records: Iterable[SynthesisRecord], pattern_config: PatternConfig | None = None
) -> dict[str, StructureReport]:
    """Analyze every record's synthesis text, keyed by record key."""
    return {r.key(): analyze(r.synthesis_text, pattern_config) for r in records}


_GROUP_FIELDS = ("model", "synthesis_type", "domain")


def _group_key(run: EvaluationRun, group_by: tuple[str, ...]) -> tuple:
    return tuple(getattr(run, g) for g in group_by)


def aggregate(
    runs: Iterable[EvaluationRun],
    reports: Mapping[str, StructureReport],
    group_by: Iterable[str] = ("model",),
) -> list[AggregateReport]:
    """Fold runs and structure reports into per-group summary tables.

    Criterion means average across runs per record first, then across
    records; bucket and structure percentages count each record once.
    """
    group_by = tuple(group_by)
    for g in group_by:
        if g not in _GROUP_FIELDS:
            raise ValueError(f"unknown group key {g!r} (expected subset of {_GROUP_FIELDS})")
    runs = list(runs)
    if not runs:
        raise ValueError("no evaluation runs to aggregate")

    groups: dict[tuple, list[EvaluationRun]] = {}
    for run in runs:
        groups.setdefault(_group_key(run, group_by), []).append(run)

    out = []
    for key in sorted(groups):
        members = groups[key]
        by_record: dict[str, list[EvaluationRun]] = {}
        for run in members:
            by_record.setdefault(run.record_key, []).append(run)

        criterion_means = {}
        for criterion in CRITERIA:
            per_record = [
                statistics.fmean(getattr(r.scores, criterion) for r in record_runs)
                for record_runs in by_record.values()
            ]
            criterion_means[criterion] = statistics.fmean(per_record)

        known = [rk for rk in by_record if rk in reports]
        missing = len(by_record) - len(known)
        if missing:
            logger.warning("%d records lack structure reports; buckets skip them", missing)
        bucket_counts = dict.fromkeys(BUCKETS, 0)
        word_counts = []
        structured = 0
        for rk in known:
            report = reports[rk]
            bucket_counts[wc_bucket(report.word_count)] += 1
            word_counts.append(report.word_count)
            structured += report.is_paper_structured
        total = len(known)
        bucket_pct = {
            b: (100.0 * c / total if total else 0.0) for b, c in bucket_counts.items()
        }

        out.append(
            AggregateReport(
                group=dict(zip(group_by, key)),
                criterion_means=criterion_means,
                bucket_percentages=bucket_pct,
                mean_word_count=statistics.fmean(word_counts) if word_counts else 0.0,
                paper_structure_pct=100.0 * structured / total if total else 0.0,
                record_count=len(by_record),
                run_count=len(members),
            )
        )
    return out


@dataclass
class ConsistencyReport:
    """Evaluator spread across repeated runs, per record and per model."""

    per_record: list[dict] = field(default_factory=list)
    model_run_table: list[dict] = field(default_factory=list)
    excluded: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "per_record": self.per_record,
            "model_run_table": self.model_run_table,
            "excluded": self.excluded,
        }


def consistency(runs: Iterable[EvaluationRun]) -> ConsistencyReport:
    """Per-criterion spread (population sd and min-max range) across runs.

    Records with fewer than two runs are excluded (and listed); the
    model-run table carries per-run criterion means, ready for plotting.
    """
    runs = list(runs)
    by_record: dict[str, list[EvaluationRun]] = {}
    for run in runs:
        by_record.setdefault(run.record_key, []).append(run)

    report = ConsistencyReport()
    for record_key in sorted(by_record):
        record_runs = by_record[record_key]
        if len(record_runs) < 2:
            report.excluded.append(record_key)
            logger.info("record %s has <2 runs; excluded from consistency", record_key)
            continue
        for criterion in CRITERIA:
            values = [getattr(r.scores, criterion) for r in record_runs]
            report.per_record.append(
                {
                    "record_key": record_key,
                    "model": record_runs[0].model,
                    "criterion": criterion,
                    "sd": statistics.pstdev(values),
                    "range": max(values) - min(values),
                    "n_runs": len(values),
                }
            )

    cells: dict[tuple[str, int, str], list[int]] = {}
    for run in runs:
        if run.record_key in report.excluded:
            continue
        for criterion in CRITERIA:
            cells.setdefault((run.model, run.run_index, criterion), []).append(
                getattr(run.scores, criterion)
            )
    for (model, run_index, criterion) in sorted(cells):
        values = cells[(model, run_index, criterion)]
        report.model_run_table.append(
            {
                "model": model,
                "run_index": run_index,
                "criterion": criterion,
                "mean": statistics.fmean(values),
            }
        )
    return report


def max_spread(report: ConsistencyReport) -> float:
    """Largest per-record spread in a consistency report (0 when empty)."""
    return max((row["sd"] for row in report.per_record), default=0.0)


def render_aggregate_table(reports: list[AggregateReport]) -> str:
    """Plain-text rendering of aggregate reports, one block per group."""
    lines = []
    for report in reports:
        group_desc = ", ".join(f"{k}={v}" for k, v in report.group.items()) or "all"
        lines.append(f"== {group_desc} ({report.record_count} records, {report.run_count} runs)")
        lines.append(
            "  word count: "
            + "  ".join(
                f"{b}={report.bucket_percentages[b]:.2f}%" for b in BUCKETS
            )
            + f"  mean={report.mean_word_count:.1f}"
        )
        lines.append(f"  paper structure: {report.paper_structure_pct:.2f}%")
        for criterion in CRITERIA:
            lines.append(f"  {criterion:<16s} {report.criterion_means[criterion]:.2f}")
        lines.append("")
    return "\n".join(lines)


def render_consistency_table(report: ConsistencyReport) -> str:
    lines = ["model  run  criterion  mean"]
    for row in report.model_run_table:
        lines.append(
            f"{row['model']}  {row['run_index']}  {row['criterion']:<16s} {row['mean']:.3f}"
        )
    if report.excluded:
        lines.append(f"excluded (<2 runs): {', '.join(report.excluded)}")
    return "\n".join(lines)

"""Command-line interface: corpus prep, prompt builds, generation,
evaluation, reward scoring/serving and report rendering."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import yaml

from . import corpus as corpus_mod
from . import harness, service
from .gateway import GatewayConfig, make_backend
from .prompting import (
    SynthesisType,
    all_types,
    build_synthesis_prompt,
    default_prompt_config,
    load_prompt_config,
)
from .rewards import RewardConfig
from .structure import analyze, default_pattern_config, load_pattern_config


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, encoding="utf-8") as fh:
        loaded = yaml.safe_load(fh) or {}
    if not isinstance(loaded, dict):
        raise click.ClickException(f"{path}: config must be a mapping")
    return loaded


def _gateway_config(cfg: dict, section: str, overrides: dict) -> GatewayConfig:
    merged = dict(cfg.get(section) or {})
    for key, value in overrides.items():
        if value is not None:
            merged[key] = value
    try:
        return GatewayConfig.from_mapping(merged)
    except (TypeError, ValueError) as exc:
        raise click.ClickException(f"bad {section} config: {exc}")


def _reward_config(cfg: dict) -> RewardConfig:
    try:
        return RewardConfig.from_mapping(cfg.get("rewards") or {})
    except (TypeError, ValueError) as exc:
        raise click.ClickException(f"bad rewards config: {exc}")


def _load_corpus(path: str | None):
    try:
        if path:
            return corpus_mod.load_corpus(path)
        return corpus_mod.load_bundled_corpus()
    except corpus_mod.MalformedRecordError as exc:
        raise click.ClickException(str(exc))


def _load_samples(path: str | None, seed: int):
    return corpus_mod.standard_pipeline(_load_corpus(path), seed=seed)


def _prompt_config(path: str | None, cfg: dict | None = None):
    path = path or (cfg or {}).get("prompts")
    return load_prompt_config(path) if path else default_prompt_config()


def _pattern_config(path: str | None, cfg: dict | None = None):
    path = path or (cfg or {}).get("patterns")
    return load_pattern_config(path) if path else default_pattern_config()


config_option = click.option(
    "--config", "config_path", type=click.Path(exists=True), default=None,
    help="YAML config; flags override its keys.",
)


gateway_options = [
    click.option("--config", "config_path", type=click.Path(exists=True), default=None,
                 help="YAML config with generator/evaluator/rewards sections."),
    click.option("--model", default=None, help="Model identifier override."),
    click.option("--base-url", default=None, help="Chat endpoint base URL override."),
    click.option("--backend", type=click.Choice(["http", "replay"]), default=None),
    click.option("--replay", "replay_path", type=click.Path(exists=True), default=None,
                 help="Replay fixture (prompt digest -> completion JSON)."),
    click.option("--parallelism", type=int, default=None),
    click.option("--max-retries", type=int, default=None),
]


def _with_options(options):
    def wrap(func):
        for option in reversed(options):
            func = option(func)
        return func
    return wrap


def _overrides(model, base_url, backend, replay_path, parallelism, max_retries) -> dict:
    return {
        "model": model,
        "base_url": base_url,
        "backend": backend,
        "replay_path": replay_path,
        "parallelism": parallelism,
        "max_retries": max_retries,
    }


@click.group()
@click.version_option(package_name="synthkit")
def main():
    """Scientific-synthesis generation, evaluation and reward toolkit."""


# ---------------------------------------------------------------- corpus


@main.group()
def corpus():
    """Corpus loading, statistics and dataset splits."""


@corpus.command("stats")
@config_option
@click.option("--corpus", "corpus_path", type=click.Path(exists=True), default=None,
              help="Corpus JSONL (defaults to the bundled corpus).")
@click.option("--seed", type=int, default=0)
@click.option("--top", type=int, default=10, help="Rows in the field table.")
@click.option("--as-json", is_flag=True, help="Emit machine-readable JSON.")
def corpus_stats(config_path, corpus_path, seed, top, as_json):
    """Pipeline counts and the per-field sample distribution."""
    cfg = _load_config_file(config_path)
    comparisons = _load_corpus(corpus_path or cfg.get("corpus"))
    samples = corpus_mod.standard_pipeline(comparisons, seed=seed)
    stats = corpus_mod.domain_stats(samples)
    payload = {
        "comparisons": len(comparisons),
        "samples": len(samples),
        "prompts": 3 * len(samples),
        "fields": [{"field": f, "count": c} for f, c in stats],
    }
    if as_json:
        click.echo(json.dumps(payload, indent=2, sort_keys=True))
        return
    click.echo(f"comparisons: {payload['comparisons']}")
    click.echo(f"samples:     {payload['samples']}")
    click.echo(f"prompts:     {payload['prompts']} (3 types per sample)")
    click.echo("top fields:")
    for f, c in stats[:top]:
        click.echo(f"  {f:<55s} {c}")


@corpus.command("split")
@config_option
@click.option("--corpus", "corpus_path", type=click.Path(exists=True), default=None)
@click.option("--test-fraction", type=float, default=0.2, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True,
              help="Split manifest JSON destination.")
def corpus_split(config_path, corpus_path, test_fraction, seed, out_path):
    """Stratified test / train-llm / train-rl split manifest."""
    cfg = _load_config_file(config_path)
    samples = _load_samples(corpus_path or cfg.get("corpus"), seed)
    try:
        split = corpus_mod.split_dataset(samples, test_fraction, seed=seed)
    except ValueError as exc:
        raise click.ClickException(str(exc))
    corpus_mod.write_split_manifest(split, out_path)
    click.echo(
        f"test={len(split.comparison_ids('test'))} "
        f"train_llm={len(split.comparison_ids('train_llm'))} "
        f"train_rl={len(split.comparison_ids('train_rl'))} comparisons -> {out_path}"
    )


# ---------------------------------------------------------------- prompt


@main.group()
def prompt():
    """Prompt construction."""


@prompt.command("build")
@config_option
@click.option("--corpus", "corpus_path", type=click.Path(exists=True), default=None)
@click.option("--type", "type_name", default="all",
              help="paper_wise | methodological | thematic | all.")
@click.option("--sample-id", "sample_ids", multiple=True,
              help="Restrict to specific sample ids (repeatable).")
@click.option("--prompts", "prompts_path", type=click.Path(exists=True), default=None,
              help="Alternative prompt config YAML.")
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Write JSONL here instead of stdout.")
def prompt_build(config_path, corpus_path, type_name, sample_ids, prompts_path, seed, out_path):
    """Render synthesis prompts for corpus samples."""
    cfg = _load_config_file(config_path)
    prompt_config = _prompt_config(prompts_path, cfg)
    samples = _load_samples(corpus_path or cfg.get("corpus"), seed)
    if sample_ids:
        wanted = set(sample_ids)
        samples = [s for s in samples if s.sample_id in wanted]
        if not samples:
            raise click.ClickException("no samples matched the given ids")
    types = all_types() if type_name == "all" else (SynthesisType.parse(type_name),)

    lines = []
    for sample in samples:
        for stype in types:
            built = build_synthesis_prompt(sample, stype, prompt_config)
            lines.append(json.dumps({
                "sample_id": built.sample_id,
                "synthesis_type": built.synthesis_type.value,
                "prompt_version": built.version,
                "text": built.text,
            }, sort_keys=True))
    output = "\n".join(lines) + "\n"
    if out_path:
        Path(out_path).write_text(output, encoding="utf-8")
        click.echo(f"wrote {len(lines)} prompts -> {out_path}")
    else:
        click.echo(output, nl=False)


# ---------------------------------------------------------------- analyze


@main.command("analyze")
@config_option
@click.argument("text", required=False)
@click.option("--file", "file_path", type=click.Path(exists=True), default=None)
@click.option("--patterns", "patterns_path", type=click.Path(exists=True), default=None)
def analyze_cmd(config_path, text, file_path, patterns_path):
    """Word count and paper-structure report for a synthesis text."""
    if file_path:
        text = Path(file_path).read_text(encoding="utf-8")
    elif text is None:
        text = sys.stdin.read()
    report = analyze(text, _pattern_config(patterns_path, _load_config_file(config_path)))
    click.echo(json.dumps(report.to_dict(), indent=2, sort_keys=True))


# ---------------------------------------------------------------- generate


@main.command("generate")
@_with_options(gateway_options)
@click.option("--corpus", "corpus_path", type=click.Path(exists=True), default=None)
@click.option("--type", "type_name", default="all")
@click.option("--sample-id", "sample_ids", multiple=True)
@click.option("--max-samples", type=int, default=None, help="Take the first N samples.")
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_dir", type=click.Path(), required=True)
def generate_cmd(config_path, model, base_url, backend, replay_path, parallelism,
                 max_retries, corpus_path, type_name, sample_ids, max_samples, seed, out_dir):
    """Generate syntheses for corpus samples."""
    cfg = _load_config_file(config_path)
    gw = _gateway_config(cfg, "generator",
                         _overrides(model, base_url, backend, replay_path,
                                    parallelism, max_retries))
    samples = _load_samples(corpus_path or cfg.get("corpus"), seed)
    if sample_ids:
        wanted = set(sample_ids)
        samples = [s for s in samples if s.sample_id in wanted]
    if max_samples is not None:
        samples = samples[:max_samples]
    if not samples:
        raise click.ClickException("no samples selected")
    types = all_types() if type_name == "all" else (SynthesisType.parse(type_name),)

    manifest = harness.run_generation(samples, types, gw, out_dir,
                                      prompt_config=_prompt_config(None, cfg))
    click.echo(f"generated {manifest['succeeded']}/{manifest['requested']} records -> {out_dir}")
    if manifest["failed"]:
        click.echo(f"failures: {manifest['failed']} (see manifest.json)", err=True)


# ---------------------------------------------------------------- evaluate


@main.command("evaluate")
@_with_options(gateway_options)
@click.option("--corpus", "corpus_path", type=click.Path(exists=True), default=None)
@click.option("--records", "record_paths", multiple=True, required=True,
              type=click.Path(exists=True), help="Record JSONL files or directories.")
@click.option("--runs", type=int, default=3, show_default=True)
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_path", type=click.Path(), required=True)
def evaluate_cmd(config_path, model, base_url, backend, replay_path, parallelism,
                 max_retries, corpus_path, record_paths, runs, seed, out_path):
    """Score generated records on the nine aspects, repeatedly."""
    cfg = _load_config_file(config_path)
    gw = _gateway_config(cfg, "evaluator",
                         _overrides(model, base_url, backend, replay_path,
                                    parallelism, max_retries))
    samples = _load_samples(corpus_path or cfg.get("corpus"), seed)
    samples_by_id = {s.sample_id: s for s in samples}
    records = harness.read_records(record_paths)
    if not records:
        raise click.ClickException("no records found")

    runs_out, failures = harness.run_evaluation(records, samples_by_id, runs, gw,
                                                prompt_config=_prompt_config(None, cfg))
    harness.write_runs(runs_out, out_path)
    click.echo(f"wrote {len(runs_out)} evaluation runs -> {out_path}")
    if failures:
        for failure in failures:
            click.echo(f"failed: {failure}", err=True)
        click.echo(f"failures: {len(failures)}", err=True)
    if not runs_out:
        raise click.ClickException("every evaluation failed")


# ---------------------------------------------------------------- reward


@main.group()
def reward():
    """Reward scoring and the reward service."""


def _service(cfg: dict, mode: str, patterns_path: str | None) -> service.RewardService:
    evaluator = None
    if mode != "basic" and cfg.get("evaluator"):
        evaluator = service.evaluator_from_gateway(
            _gateway_config(cfg, "evaluator", {}),
            prompt_config=_prompt_config(None, cfg),
        )
    return service.RewardService(
        mode=mode,
        reward_config=_reward_config(cfg),
        pattern_config=_pattern_config(patterns_path, cfg),
        evaluator=evaluator,
    )


@reward.command("score")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--mode", type=click.Choice(list(service.MODES)), default="basic",
              show_default=True)
@click.option("--text", default=None, help="Synthesis text (defaults to stdin).")
@click.option("--file", "file_path", type=click.Path(exists=True), default=None)
@click.option("--scores", "scores_json", default=None,
              help="Criteria scores as JSON object (required content for gpt4 mode).")
@click.option("--patterns", "patterns_path", type=click.Path(exists=True), default=None)
def reward_score(config_path, mode, text, file_path, scores_json, patterns_path):
    """Score one synthesis and print the full reward response."""
    if file_path:
        text = Path(file_path).read_text(encoding="utf-8")
    elif text is None:
        text = sys.stdin.read()
    request = {"synthesis_text": text}
    if scores_json:
        request["criteria_scores"] = json.loads(scores_json)
    svc = _service(_load_config_file(config_path), mode, patterns_path)
    response = svc.handle_line(json.dumps(request))
    click.echo(json.dumps(response, indent=2, sort_keys=True))
    if "error" in response:
        sys.exit(1)


@reward.command("serve")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--mode", type=click.Choice(list(service.MODES)), default="basic",
              show_default=True)
@click.option("--transport", type=click.Choice(["stdio", "socket"]), default="stdio",
              show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8642, show_default=True)
@click.option("--patterns", "patterns_path", type=click.Path(exists=True), default=None)
def reward_serve(config_path, mode, transport, host, port, patterns_path):
    """Serve rewards over stdio or a local TCP socket."""
    svc = _service(_load_config_file(config_path), mode, patterns_path)
    if transport == "stdio":
        service.serve_stdio(svc)
    else:
        service.serve_socket(svc, host=host, port=port)


# ---------------------------------------------------------------- report


@main.group()
def report():
    """Aggregation, bucket and consistency reports."""


def _read_runs_or_fail(runs_path) -> list:
    runs = harness.read_runs(runs_path)
    if not runs:
        raise click.ClickException(f"{runs_path}: no evaluation runs")
    return runs


@report.command("aggregate")
@config_option
@click.option("--runs", "runs_path", type=click.Path(exists=True), required=True)
@click.option("--records", "record_paths", multiple=True, required=True,
              type=click.Path(exists=True))
@click.option("--group-by", default="model", show_default=True,
              help="Comma-separated subset of model,synthesis_type,domain.")
@click.option("--as-json", is_flag=True)
@click.option("--out", "out_path", type=click.Path(), default=None)
def report_aggregate(config_path, runs_path, record_paths, group_by, as_json, out_path):
    """Per-criterion means plus bucket and structure rates per group."""
    cfg = _load_config_file(config_path)
    runs = _read_runs_or_fail(runs_path)
    records = harness.read_records(record_paths)
    reports = harness.structure_reports(records, _pattern_config(None, cfg))
    try:
        agg = harness.aggregate(runs, reports, [g.strip() for g in group_by.split(",") if g])
    except ValueError as exc:
        raise click.ClickException(str(exc))
    payload = json.dumps([a.to_dict() for a in agg], indent=2, sort_keys=True)
    rendered = payload if as_json else harness.render_aggregate_table(agg)
    if out_path:
        Path(out_path).write_text(rendered + "\n", encoding="utf-8")
        click.echo(f"wrote report -> {out_path}")
    else:
        click.echo(rendered)


@report.command("buckets")
@config_option
@click.option("--records", "record_paths", multiple=True, required=True,
              type=click.Path(exists=True))
@click.option("--as-json", is_flag=True)
def report_buckets(config_path, record_paths, as_json):
    """Word-count bucket percentages and structure rate over records."""
    cfg = _load_config_file(config_path)
    records = harness.read_records(record_paths)
    if not records:
        raise click.ClickException("no records found")
    reports = harness.structure_reports(records, _pattern_config(None, cfg))
    counts = dict.fromkeys(harness.BUCKETS, 0)
    structured = 0
    for report_ in reports.values():
        counts[harness.wc_bucket(report_.word_count)] += 1
        structured += report_.is_paper_structured
    total = len(reports)
    payload = {
        "records": total,
        "bucket_percentages": {b: 100.0 * c / total for b, c in counts.items()},
        "mean_word_count": sum(r.word_count for r in reports.values()) / total,
        "paper_structure_pct": 100.0 * structured / total,
    }
    if as_json:
        click.echo(json.dumps(payload, indent=2, sort_keys=True))
    else:
        for bucket in harness.BUCKETS:
            click.echo(f"{bucket:<12s} {payload['bucket_percentages'][bucket]:.2f}%")
        click.echo(f"mean WC      {payload['mean_word_count']:.1f}")
        click.echo(f"structured   {payload['paper_structure_pct']:.2f}%")


@report.command("consistency")
@config_option
@click.option("--runs", "runs_path", type=click.Path(exists=True), required=True)
@click.option("--as-json", is_flag=True)
@click.option("--out", "out_path", type=click.Path(), default=None)
def report_consistency(config_path, runs_path, as_json, out_path):
    """Evaluator spread across repeated runs of the same records."""
    _load_config_file(config_path)
    runs = _read_runs_or_fail(runs_path)
    rep = harness.consistency(runs)
    rendered = (
        json.dumps(rep.to_dict(), indent=2, sort_keys=True)
        if as_json
        else harness.render_consistency_table(rep)
    )
    if out_path:
        Path(out_path).write_text(rendered + "\n", encoding="utf-8")
        click.echo(f"wrote report -> {out_path}")
    else:
        click.echo(rendered)


if __name__ == "__main__":
    main()

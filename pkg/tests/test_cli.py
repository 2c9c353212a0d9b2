"""CLI surface: flags, config-file handling and exit codes."""

import json

import yaml
from click.testing import CliRunner

from synthkit.cli import main
from synthkit.gateway import prompt_digest
from synthkit.prompting import build_synthesis_prompt
from synthkit.rewards import CRITERIA

from conftest import comparison_record, make_sample, write_corpus_file


def invoke(args, **kwargs):
    return CliRunner().invoke(main, args, **kwargs)


def test_corpus_stats_bundled_json():
    result = invoke(["corpus", "stats", "--as-json"])
    assert result.exit_code == 0
    payload = json.loads(result.output)
    assert payload["samples"] == 348
    assert payload["prompts"] == 1044
    assert payload["fields"][0] == {"field": "Computer Sciences", "count": 125}


def test_corpus_stats_config_corpus_key(tmp_path):
    corpus_path = write_corpus_file(tmp_path, [comparison_record(f"C{i}") for i in range(3)])
    config_path = tmp_path / "cfg.yaml"
    config_path.write_text(yaml.safe_dump({"corpus": str(corpus_path)}), encoding="utf-8")
    result = invoke(["corpus", "stats", "--as-json", "--config", str(config_path)])
    assert result.exit_code == 0
    assert json.loads(result.output)["samples"] == 3


def test_corpus_split_manifest(tmp_path):
    out = tmp_path / "split.json"
    result = invoke(["corpus", "split", "--seed", "13", "--out", str(out)])
    assert result.exit_code == 0
    manifest = json.loads(out.read_text(encoding="utf-8"))
    assert manifest["seed"] == 13
    assert len(manifest["test"]) == 78
    assert len(manifest["train_llm"]) == 135
    assert len(manifest["train_rl"]) == 135
    assert "test=78" in result.output


def test_prompt_build_single_sample(tmp_path):
    result = invoke(["prompt", "build", "--sample-id", "S0001", "--type", "methodological"])
    assert result.exit_code == 0
    row = json.loads(result.output.splitlines()[0])
    assert row["sample_id"] == "S0001"
    assert row["synthesis_type"] == "methodological"
    assert "[research-problem]" not in row["text"]
    assert row["text"].count("200 words") == 2


def test_prompt_build_unknown_sample_errors():
    result = invoke(["prompt", "build", "--sample-id", "NOPE"])
    assert result.exit_code != 0


def test_analyze_reports_structure():
    result = invoke(["analyze", "Title: X\nplain text after"])
    assert result.exit_code == 0
    payload = json.loads(result.output)
    assert payload["is_paper_structured"] is True
    assert payload["word_count"] == 5


def test_reward_score_gpt4_mode():
    scores = json.dumps({c: 5 for c in CRITERIA})
    result = invoke(
        ["reward", "score", "--mode", "gpt4", "--text", "word " * 120, "--scores", scores]
    )
    assert result.exit_code == 0
    assert json.loads(result.output)["reward"] == 4.0


def test_reward_score_error_exit_code():
    result = invoke(["reward", "score", "--mode", "gpt4", "--text", "word " * 120])
    assert result.exit_code == 1
    assert json.loads(result.output)["error"]["type"] == "missing_scores"


def test_generate_and_buckets_roundtrip(tmp_path):
    # replay fixture for one sample, one type
    from synthkit.corpus import load_bundled_corpus, standard_pipeline

    sample = standard_pipeline(load_bundled_corpus(), seed=0)[0]
    prompt = build_synthesis_prompt(sample, "paper_wise")
    fixture = {
        prompt_digest([{"role": "user", "content": prompt.text}]): "word " * 120
    }
    replay = tmp_path / "replay.json"
    replay.write_text(json.dumps(fixture), encoding="utf-8")
    gen_dir = tmp_path / "gen"

    result = invoke(
        ["generate", "--backend", "replay", "--replay", str(replay), "--model", "m",
         "--sample-id", sample.sample_id, "--type", "paper_wise", "--out", str(gen_dir)]
    )
    assert result.exit_code == 0, result.output
    assert "generated 1/1" in result.output

    buckets = invoke(["report", "buckets", "--records", str(gen_dir), "--as-json"])
    assert buckets.exit_code == 0
    payload = json.loads(buckets.output)
    assert payload["records"] == 1
    assert payload["bucket_percentages"]["wc_50_150"] == 100.0


def test_evaluate_all_failures_is_hard_error(tmp_path):
    gen_dir = tmp_path / "gen"
    gen_dir.mkdir()
    record = {
        "sample_id": "UNKNOWN", "synthesis_type": "paper_wise", "model": "m",
        "raw_response": "x", "synthesis_text": "x", "prompt_version": "1",
        "metadata": {},
    }
    (gen_dir / "m__paper_wise.jsonl").write_text(json.dumps(record) + "\n", encoding="utf-8")
    replay = tmp_path / "replay.json"
    replay.write_text("{}", encoding="utf-8")
    result = invoke(
        ["evaluate", "--backend", "replay", "--replay", str(replay), "--model", "e",
         "--records", str(gen_dir), "--runs", "1", "--out", str(tmp_path / "runs.jsonl")]
    )
    assert result.exit_code != 0


def test_bad_config_file_rejected(tmp_path):
    config_path = tmp_path / "cfg.yaml"
    config_path.write_text("- not\n- a\n- mapping\n", encoding="utf-8")
    result = invoke(["corpus", "stats", "--config", str(config_path)])
    assert result.exit_code != 0


def test_analyze_patterns_from_config(tmp_path):
    from importlib import resources

    patterns_src = resources.files("synthkit").joinpath("data/patterns.yaml").read_text("utf-8")
    patterns_path = tmp_path / "patterns.yaml"
    patterns_path.write_text(patterns_src, encoding="utf-8")
    config_path = tmp_path / "cfg.yaml"
    config_path.write_text(yaml.safe_dump({"patterns": str(patterns_path)}), encoding="utf-8")
    result = invoke(["analyze", "plain words only", "--config", str(config_path)])
    assert result.exit_code == 0
    assert json.loads(result.output)["is_paper_structured"] is False

"""Acceptance suite: one test per release criterion, at pinned tolerances.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
pass lines.
"""

import filecmp
import json
import math
import random
import time
from pathlib import Path

import pytest
from click.testing import CliRunner

import synthkit.gateway as gateway_mod
from synthkit.cli import main as cli_main
from synthkit.corpus import (
    enumerate_collections,
    load_bundled_corpus,
    split_dataset,
    standard_pipeline,
)
from synthkit.gateway import prompt_digest
from synthkit.harness import consistency, max_spread, read_runs
from synthkit.prompting import all_types, build_evaluation_prompt, build_synthesis_prompt
from synthkit.rewards import (
    CRITERIA,
    CriteriaScores,
    kl_term,
    penalized_reward,
    pvf_score,
    r_basic,
    r_gpt4,
)
from synthkit.structure import analyze

from conftest import make_comparison
from test_structure import load_labeled_fixture

PASS = "PASS: {}"


def vec(values) -> CriteriaScores:
    return CriteriaScores.from_mapping(dict(zip(CRITERIA, values)))


def test_reward_constant_suite():
    """Every basic-reward branch returns its exact published constant."""
    started = time.perf_counter()
    cases = [
        (40, False, -1.5),   # too short
        (300, False, -1.0),  # too long
        (100, True, -2.0),   # paper-structured
        (190, False, -0.5),  # near the limit
        (120, False, 2.0),   # ok
        (210, False, -1.0),  # overlap: length case precedes the band
        (40, True, -1.5),    # overlap: short case precedes structure
    ]
    for wc, ps, expected in cases:
        got = r_basic(wc, ps)
        assert got == expected, (wc, ps, got, expected)
    # range is exactly the published constant set
    observed = {r_basic(wc, ps) for wc in range(0, 400) for ps in (False, True)}
    assert observed == {-2.0, -1.5, -1.0, -0.5, 2.0}
    elapsed = time.perf_counter() - started
    assert elapsed < 1.0, f"reward constant suite took {elapsed:.3f}s"
    print(PASS.format(f"reward constants exact, {elapsed * 1000:.0f} ms"))


def test_pvf_rgpt4_boundary_suite():
    """Preferred-value scoring and its bonus threshold, to 1e-12."""
    tol = 1e-12
    assert abs(pvf_score(vec([5] * 9), 5) - 0.0) <= tol
    assert r_gpt4(vec([5] * 9)) == 4.0
    assert r_gpt4(vec([5] * 8 + [4])) == 4.0  # PVF = -1/9 >= -0.125
    assert abs(r_gpt4(vec([5] * 7 + [4, 4])) - (-2 / 9)) <= tol
    assert abs(pvf_score(vec([1] * 9), 5) - (-4.0)) <= tol

    rng = random.Random(20240817)
    for _ in range(10_000):
        scores = vec([rng.randint(1, 5) for _ in range(9)])
        reward = r_gpt4(scores)
        assert reward == 4.0 or (-4.0 <= reward < -0.125), reward
    print(PASS.format("PVF / criteria-reward boundaries, 10k-vector range check"))


def test_kl_penalty_suite():
    """KL self-term zero, penalty linearity, 50-token oracle parity."""
    tol = 1e-12
    rng = random.Random(99)
    for _ in range(1000):
        n = rng.randint(1, 80)
        seq = [rng.uniform(-12, 0) for _ in range(n)]
        assert kl_term(seq, seq) == 0.0

    for _ in range(200):
        r = rng.uniform(-4, 4)
        k = rng.uniform(-20, 20)
        assert penalized_reward(r, k, 0.0) == r
        assert abs(penalized_reward(r, k, 1.0) - (r - k)) <= tol
        assert abs(penalized_reward(r, k, 0.2) - (r - 0.2 * k)) <= tol
        # linear interpolation between the endpoints
        blended = 0.2 * penalized_reward(r, k, 1.0) + 0.8 * penalized_reward(r, k, 0.0)
        assert abs(penalized_reward(r, k, 0.2) - blended) <= tol

    policy = [rng.uniform(-9, 0) for _ in range(50)]
    base = [rng.uniform(-9, 0) for _ in range(50)]
    oracle = 0.0
    for p, b in zip(policy, base):
        oracle += p - b
    assert abs(kl_term(policy, base) - oracle) <= tol
    print(PASS.format("KL term and penalty linearity at lambda in {0, 0.2, 1}"))


def test_structure_detector_criterion():
    """F1 >= 0.95 on the bundled labeled fixture; citations never flip."""
    items = load_labeled_fixture()
    tp = fp = fn = 0
    for item in items:
        predicted = analyze(item["text"]).is_paper_structured
        tp += predicted and item["label"]
        fp += predicted and not item["label"]
        fn += (not predicted) and item["label"]
    f1 = 2 * tp / (2 * tp + fp + fn)
    assert f1 >= 0.95, f"fixture F1 {f1:.4f}"

    # prompt-mandated citation forms never trigger the structure flag
    rng = random.Random(4)
    words = "the studies report converging evidence across all five cohorts".split()
    for _ in range(200):
        body = " ".join(rng.choice(words) for _ in range(rng.randint(5, 60)))
        cites = " ".join(
            "(" + ", ".join(str(rng.randint(1, 5)) for _ in range(rng.randint(1, 3))) + ")"
            for _ in range(rng.randint(1, 4))
        )
        report = analyze(f"{body} {cites}")
        assert not report.is_paper_structured
    assert not analyze("A single claim (1) and a joint one (3, 5).").is_paper_structured
    print(PASS.format(f"structure detector F1 {f1:.4f} >= 0.95, whitelist holds"))


def test_corpus_pipeline_criterion():
    """348 samples -> 1044 prompts; 78/270 split with 135+135 halves."""
    started = time.perf_counter()
    samples = standard_pipeline(load_bundled_corpus(), seed=13)
    assert len(samples) == 348
    prompts = [
        build_synthesis_prompt(s, t) for s in samples for t in all_types()
    ]
    assert len(prompts) == 1044

    split = split_dataset(samples, 0.2, seed=13)
    counts = (
        len(split.comparison_ids("test")),
        len(split.comparison_ids("train_llm")),
        len(split.comparison_ids("train_rl")),
    )
    assert counts == (78, 135, 135), counts

    # n-choose-5 enumeration vs bitmask brute force for n <= 10
    for n in range(5, 11):
        comparison = make_comparison(f"N{n}", n_papers=n)
        got = {
            tuple(p.title for p in s.papers)
            for s in enumerate_collections(comparison)
        }
        titles = [p.title for p in comparison.papers]
        expected = {
            tuple(titles[i] for i in range(n) if mask >> i & 1)
            for mask in range(1 << n)
            if bin(mask).count("1") == 5
        }
        assert got == expected
        assert len(got) == math.comb(n, 5)

    elapsed = time.perf_counter() - started
    assert elapsed < 30.0, f"corpus pipeline criterion took {elapsed:.1f}s"
    print(PASS.format(f"corpus pipeline 348/1044 and 78/270 (135+135), {elapsed:.1f}s"))


# ------------------------------------------------------------------ offline end-to-end


WORD = "evidence from the pooled cohorts points to steady measurable gains across sites".split()


def _clean_words(n: int, salt: int) -> str:
    rng = random.Random(salt)
    return " ".join(rng.choice(WORD) for _ in range(n))


def _profile_text(index: int) -> str:
    # cycle through all buckets plus a structured case
    kind = index % 6
    if kind == 0:
        return _clean_words(120, index)
    if kind == 1:
        return _clean_words(40, index)
    if kind == 2:
        return _clean_words(205, index)
    if kind == 3:
        return "Introduction:\n" + _clean_words(99, index)
    if kind == 4:
        return _clean_words(190, index)
    return _clean_words(260, index)


def _profile_scores(index: int) -> dict:
    values = {c: 4 for c in CRITERIA}
    values[CRITERIA[index % 9]] = 5
    values[CRITERIA[(index + 3) % 9]] = 3
    return values


def _build_replay_fixture(samples) -> dict[str, str]:
    fixtures = {}
    index = 0
    for sample in samples:
        for stype in all_types():
            prompt = build_synthesis_prompt(sample, stype)
            text = _profile_text(index)
            fixtures[prompt_digest([{"role": "user", "content": prompt.text}])] = text
            eval_prompt = build_evaluation_prompt(sample, text.strip())
            block = "\n".join(f"{c}: {v}" for c, v in _profile_scores(index).items())
            fixtures[prompt_digest([{"role": "user", "content": eval_prompt}])] = (
                f"```\n{block}\n```"
            )
            index += 1
    return fixtures


def _run_offline_chain(runner, fixture_path: Path, workdir: Path) -> dict:
    workdir.mkdir()
    gen_dir = workdir / "gen"
    runs_path = workdir / "runs.jsonl"
    agg_path = workdir / "aggregate.json"
    cons_path = workdir / "consistency.json"

    steps = [
        ["generate", "--backend", "replay", "--replay", str(fixture_path),
         "--model", "gen-mock", "--max-samples", "6", "--out", str(gen_dir)],
        ["evaluate", "--backend", "replay", "--replay", str(fixture_path),
         "--model", "eval-mock", "--records", str(gen_dir), "--runs", "3",
         "--out", str(runs_path)],
        ["report", "aggregate", "--runs", str(runs_path), "--records", str(gen_dir),
         "--group-by", "model,synthesis_type", "--as-json", "--out", str(agg_path)],
        ["report", "consistency", "--runs", str(runs_path), "--as-json",
         "--out", str(cons_path)],
    ]
    for step in steps:
        result = runner.invoke(cli_main, step, catch_exceptions=False)
        assert result.exit_code == 0, f"{step}: {result.output}"

    buckets = runner.invoke(
        cli_main,
        ["report", "buckets", "--records", str(gen_dir), "--as-json"],
        catch_exceptions=False,
    )
    assert buckets.exit_code == 0
    return {
        "gen_dir": gen_dir,
        "runs_path": runs_path,
        "agg_path": agg_path,
        "cons_path": cons_path,
        "buckets": json.loads(buckets.output),
    }


def test_offline_end_to_end_criterion(tmp_path, monkeypatch):
    """Replay-backed generate -> evaluate(runs=3) -> report, byte-stable."""

    class NoNetwork:
        def __init__(self, *args, **kwargs):
            raise AssertionError("network backend constructed during offline run")

    monkeypatch.setattr(gateway_mod, "HttpBackend", NoNetwork)

    started = time.perf_counter()
    samples = standard_pipeline(load_bundled_corpus(), seed=0)[:6]
    fixture_path = tmp_path / "replay.json"
    fixture_path.write_text(json.dumps(_build_replay_fixture(samples)), encoding="utf-8")

    runner = CliRunner()
    first = _run_offline_chain(runner, fixture_path, tmp_path / "a")
    second = _run_offline_chain(runner, fixture_path, tmp_path / "b")

    # byte-for-byte determinism across the two invocations
    gen_files = sorted(p.name for p in first["gen_dir"].iterdir())
    assert gen_files == sorted(p.name for p in second["gen_dir"].iterdir())
    for name in gen_files:
        assert filecmp.cmp(first["gen_dir"] / name, second["gen_dir"] / name,
                           shallow=False), name
    for key in ("runs_path", "agg_path", "cons_path"):
        assert first[key].read_bytes() == second[key].read_bytes(), key
    assert first["buckets"] == second["buckets"]

    # 6 samples x 3 types, scored 3 times each
    runs = read_runs(first["runs_path"])
    assert len(runs) == 18 * 3

    # bucket percentages sum to 100 (within rounding)
    bucket_sum = sum(first["buckets"]["bucket_percentages"].values())
    assert abs(bucket_sum - 100.0) <= 0.01

    # identical replayed runs -> zero consistency spread
    spread = max_spread(consistency(runs))
    assert spread == 0.0
    cons = json.loads(first["cons_path"].read_text(encoding="utf-8"))
    assert all(row["sd"] == 0.0 and row["range"] == 0 for row in cons["per_record"])

    elapsed = time.perf_counter() - started
    assert elapsed < 60.0, f"offline end-to-end took {elapsed:.1f}s"
    print(PASS.format(f"offline end-to-end deterministic, {elapsed:.1f}s, spread 0"))

"""Word counting and the rule-based paper-structure identifier."""

import json
import re
from importlib import resources
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from synthkit.structure import (
    PatternConfig,
    PatternConfigError,
    analyze,
    default_pattern_config,
    detect_paper_structure,
    load_pattern_config,
    word_count,
)

FIXTURES = Path(__file__).parent / "fixtures"


def load_labeled_fixture():
    raw = resources.files("synthkit").joinpath("data/structure_fixture.json").read_text("utf-8")
    return json.loads(raw)["items"]


# ------------------------------------------------------------------ word count


@pytest.mark.parametrize(
    "text,expected",
    [
        ("a b c", 3),
        ("", 0),
        ("   \n\t ", 0),
        ("one", 1),
        ("  leading and trailing  ", 3),
        ("line\nbreaks\ncount\ttabs too", 5),
    ],
)
def test_word_count_basics(text, expected):
    assert word_count(text) == expected


def test_word_count_200_token_fixture():
    text = (FIXTURES / "wordcount_200.txt").read_text(encoding="utf-8")
    # independent oracle: count non-whitespace runs by regex
    assert len(re.findall(r"\S+", text)) == 200
    assert word_count(text) == 200


@given(st.text(alphabet=" \t\n", max_size=5), st.text(alphabet=" \t\n", max_size=5))
@settings(max_examples=40)
def test_word_count_whitespace_invariance(prefix, suffix):
    base = "alpha beta gamma"
    assert word_count(prefix + base + suffix) == 3
    assert word_count(base.replace(" ", "   ")) == 3


# ------------------------------------------------------------------ config contract


def test_default_config_counts():
    config = default_pattern_config()
    assert len(config.vocabulary) == 17
    assert len(config.reference_sources) == 9


def test_config_rejects_wrong_counts():
    config = default_pattern_config()
    with pytest.raises(PatternConfigError):
        PatternConfig(config.vocabulary[:-1], config.reference_sources, r"\(\d\)")
    short_refs = dict(list(config.reference_sources.items())[:-1])
    with pytest.raises(PatternConfigError):
        PatternConfig(config.vocabulary, short_refs, r"\(\d\)")


def test_config_rejects_bad_regex():
    config = default_pattern_config()
    refs = dict(config.reference_sources)
    refs["url"] = "("
    with pytest.raises(PatternConfigError):
        PatternConfig(config.vocabulary, refs, r"\(\d\)")


def test_load_pattern_config_from_file(tmp_path):
    src = resources.files("synthkit").joinpath("data/patterns.yaml").read_text("utf-8")
    path = tmp_path / "patterns.yaml"
    path.write_text(src, encoding="utf-8")
    config = load_pattern_config(path)
    assert len(config.vocabulary) == 17


# ------------------------------------------------------------------ heading rule


def test_headings_detected():
    report = detect_paper_structure("Title: X\nAbstract: words here\nConclusion: done")
    assert report.is_paper_structured
    assert len(report.matched_terms) >= 2
    assert {h.term for h in report.matched_terms} == {"Title", "Abstract", "Conclusion"}


def test_heading_requires_line_initial_position():
    report = detect_paper_structure(
        "The abstract of each paper was compared against its title in every study."
    )
    assert not report.is_paper_structured


def test_heading_requires_colon_or_line_end():
    assert not detect_paper_structure("Results from three trials agree.").is_paper_structured
    assert detect_paper_structure("Results:\nthree trials agree").is_paper_structured
    assert detect_paper_structure("some text\nResults\nmore text").is_paper_structured


def test_heading_case_insensitive():
    assert detect_paper_structure("INTRODUCTION:\ntext").is_paper_structured
    assert detect_paper_structure("introduction\ntext").is_paper_structured


def test_heading_offsets_point_at_term():
    text = "intro line\n  Methods: details"
    report = detect_paper_structure(text)
    hit = report.matched_terms[0]
    assert text[hit.offset : hit.offset + len("Methods")] == "Methods"


# ------------------------------------------------------------------ reference rule


def test_whitelisted_citations_do_not_flip():
    text = (
        "The first study (1) reports gains, later confirmed (3, 5) under stricter "
        "protocols, while a single site (2) lags behind."
    )
    report = detect_paper_structure(text)
    assert not report.is_paper_structured
    assert report.matched_reference_patterns == []


def test_doi_url_detected():
    report = detect_paper_structure(
        "Shared materials live at https://doi.org/10.1000/xyz for all five studies."
    )
    assert report.is_paper_structured
    names = {h.pattern for h in report.matched_reference_patterns}
    assert "url" in names or "doi" in names


@pytest.mark.parametrize(
    "text,pattern",
    [
        ("Costs fall with scale [2] in every region.", "bracketed_numeric"),
        ("Costs fall with scale (Smith, 2020) everywhere.", "author_year"),
        ("As Keller et al. argue, scale matters.", "et_al"),
        ("Keller, J., & Ames, R. (2019). Scale effects. J. Econ.", "bibliographic_line"),
        ("See https://example.org/materials for protocols.", "url"),
        ("Archived under 10.5281/zenodo.1234 for reuse.", "doi"),
        ("Archived as doi: 10.5281/zenodo.1234 for reuse.", "doi_prefix"),
        ("Summaries are available at the portal.", "available_at"),
        ("1. Keller, J. Scale effects in brief.", "numbered_reference_line"),
    ],
)
def test_each_reference_pattern_fires(text, pattern):
    report = detect_paper_structure(text)
    assert pattern in {h.pattern for h in report.matched_reference_patterns}, text


@pytest.mark.parametrize(
    "text",
    [
        "Moreover, U.S. studies suggest 2020 was pivotal for adoption (1, 2).",
        "However, B. vulgaris dominates the samples (3).",
        "Spending reached 10.5 percent of budgets (4).",
        "Effects range from 0.2 to 0.4 in all cohorts (1, 5).",
        "Since 2019, enrollment grew steadily (2).",
        "One pattern repeats: adoption lags measurement (1, 3).",
    ],
)
def test_reference_patterns_ignore_plain_prose(text):
    report = detect_paper_structure(text)
    assert report.matched_reference_patterns == [], text
    assert not report.is_paper_structured


CLEAN_WORDS = st.lists(
    st.sampled_from("the model cohort shows steady gains across sites and seasons".split()),
    min_size=3,
    max_size=40,
)


@given(CLEAN_WORDS)
@settings(max_examples=40)
def test_appending_heading_flips_structure(words):
    text = " ".join(words)
    assert not detect_paper_structure(text).is_paper_structured
    assert detect_paper_structure(text + "\nIntroduction:").is_paper_structured
    assert detect_paper_structure(text + "\nConclusion\n").is_paper_structured


@given(
    CLEAN_WORDS,
    st.lists(
        st.lists(st.integers(min_value=1, max_value=99), min_size=1, max_size=3),
        min_size=1,
        max_size=4,
    ),
)
@settings(max_examples=40)
def test_digit_citations_never_flip(words, citation_groups):
    parts = [" ".join(words)]
    for group in citation_groups:
        parts.append("(" + ", ".join(str(n) for n in group) + ")")
    text = " ".join(parts)
    report = detect_paper_structure(text)
    assert report.matched_reference_patterns == []
    assert not report.is_paper_structured


# ------------------------------------------------------------------ analyze


def test_analyze_empty():
    report = analyze("")
    assert report.word_count == 0
    assert not report.is_paper_structured


def test_analyze_labeled_fixture_extremes():
    items = {item["id"]: item for item in load_labeled_fixture()}
    structured = analyze(items["ps01"]["text"])
    assert structured.word_count > 0
    assert structured.is_paper_structured
    clean_180 = analyze(items["cl20"]["text"])
    assert clean_180.word_count == 180
    assert not clean_180.is_paper_structured


def test_fixture_f1():
    items = load_labeled_fixture()
    assert len(items) == 40
    assert sum(1 for item in items if item["label"]) == 20
    tp = fp = fn = 0
    for item in items:
        predicted = analyze(item["text"]).is_paper_structured
        if predicted and item["label"]:
            tp += 1
        elif predicted and not item["label"]:
            fp += 1
        elif not predicted and item["label"]:
            fn += 1
    f1 = 2 * tp / (2 * tp + fp + fn)
    assert f1 >= 0.95


def test_report_serialization():
    report = analyze("Title: X\nsee [1] for details")
    data = report.to_dict()
    assert data["is_paper_structured"] is True
    assert data["matched_terms"][0]["term"] == "Title"
    assert {h["pattern"] for h in data["matched_reference_patterns"]} == {"bracketed_numeric"}

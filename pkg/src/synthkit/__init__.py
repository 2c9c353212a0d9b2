"""Toolkit for generating, evaluating and reward-scoring scientific syntheses
of five-paper bundles through chat-completion endpoints."""

from .corpus import (
    Comparison,
    DatasetSplit,
    Paper,
    SynthesisSample,
    dedup_multifield,
    domain_stats,
    enumerate_collections,
    filter_min_unique_papers,
    load_bundled_corpus,
    load_corpus,
    split_dataset,
    standard_pipeline,
)
from .gateway import (
    GatewayConfig,
    ReplayBackend,
    SynthesisRecord,
    evaluate,
    generate,
    parse_scores,
    prompt_digest,
    render_scores,
)
from .prompting import (
    SynthesisPrompt,
    SynthesisType,
    build_evaluation_prompt,
    build_synthesis_prompt,
    instruction_for_type,
)
from .rewards import (
    CRITERIA,
    CriteriaScores,
    RewardConfig,
    kl_per_token,
    kl_term,
    penalized_reward,
    pvf_score,
    r_basic,
    r_gpt4,
)
from .service import RewardServer, RewardService
from .structure import (
    PatternConfig,
    StructureReport,
    analyze,
    default_pattern_config,
    detect_paper_structure,
    word_count,
)

__version__ = "0.1.0"

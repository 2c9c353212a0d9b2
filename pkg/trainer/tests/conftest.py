"""Shared trainer test fixtures: toy data and an in-process reward stub."""

import json
from pathlib import Path

import pytest

from synthtrainer.config import TrainerConfig
from synthtrainer.sft import load_pairs

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def toy_pairs():
    return load_pairs(FIXTURES / "toy_pairs.json")


@pytest.fixture(scope="session")
def ppo_prompts():
    return json.loads((FIXTURES / "ppo_prompts.json").read_text(encoding="utf-8"))


@pytest.fixture
def tiny_config():
    # smaller shape than the defaults so tests stay fast; the published
    # hyperparameters themselves are untouched
    return TrainerConfig(d_model=32, n_layers=2, n_heads=2, max_seq_len=96,
                         max_new_tokens=12, seed=3)


class LocalRewardStub:
    """In-process stand-in for the reward service (basic mode)."""

    def __init__(self, kl_coefficient: float = 0.2):
        from synthkit.rewards import RewardConfig
        from synthkit.service import RewardService

        self.service = RewardService(
            mode="basic",
            reward_config=RewardConfig(kl_coefficient=kl_coefficient),
        )

    def score(self, request: dict) -> dict:
        response = self.service.handle_line(json.dumps(request))
        assert "error" not in response, response
        return response

    def close(self):
        pass


@pytest.fixture
def reward_stub():
    return LocalRewardStub()

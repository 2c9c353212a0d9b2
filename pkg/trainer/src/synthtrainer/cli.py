"""CLI for the desk-scale trainer: SFT and PPO stages."""

from __future__ import annotations

import json
import logging
from pathlib import Path

import click
import yaml

from .config import TrainerConfig
from .ppo import run_ppo
from .reward_client import SocketRewardClient, StdioRewardClient, default_service_command
from .sft import load_checkpoint, load_pairs, run_sft, save_checkpoint

logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")


def _config(path: str | None) -> TrainerConfig:
    if not path:
        return TrainerConfig()
    with open(path, encoding="utf-8") as fh:
        return TrainerConfig.from_mapping(yaml.safe_load(fh) or {})


@click.group()
def main():
    """Adapter fine-tuning and reward-driven policy optimization."""


@main.command()
@click.option("--pairs", "pairs_path", type=click.Path(exists=True), required=True,
              help="JSON list of {prompt, target} pairs.")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--epochs", type=int, default=None, help="Override configured epochs.")
@click.option("--out", "out_dir", type=click.Path(), required=True)
def sft(pairs_path, config_path, epochs, out_dir):
    """Supervised fine-tuning of the adapters on prompt/target pairs."""
    config = _config(config_path)
    checkpoint = run_sft(config, load_pairs(pairs_path), epochs=epochs)
    save_checkpoint(checkpoint, out_dir)
    losses = ", ".join(f"{loss:.4f}" for loss in checkpoint.metrics["epoch_losses"])
    click.echo(f"sft done; epoch losses: {losses}")
    click.echo(f"checkpoint -> {out_dir}")


@main.command()
@click.option("--prompts", "prompts_path", type=click.Path(exists=True), required=True,
              help="JSON list of prompt strings.")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--mode", type=click.Choice(["basic", "gpt4"]), default="basic",
              show_default=True)
@click.option("--init", "init_dir", type=click.Path(exists=True), default=None,
              help="Checkpoint directory to continue from.")
@click.option("--batches", type=int, default=4, show_default=True)
@click.option("--reward-endpoint", default=None,
              help="host:port of a running reward server (default: spawn one over stdio).")
@click.option("--reward-config", type=click.Path(exists=True), default=None,
              help="Config file passed to the spawned reward service.")
@click.option("--out", "out_dir", type=click.Path(), required=True)
def ppo(prompts_path, config_path, mode, init_dir, batches, reward_endpoint,
        reward_config, out_dir):
    """PPO loop consuming the external reward service."""
    config = _config(config_path)
    prompts = json.loads(Path(prompts_path).read_text(encoding="utf-8"))
    init_checkpoint = load_checkpoint(init_dir) if init_dir else None

    if reward_endpoint:
        host, _, port = reward_endpoint.partition(":")
        client = SocketRewardClient(host, int(port))
    else:
        client = StdioRewardClient(default_service_command(mode, reward_config))

    Path(out_dir).mkdir(parents=True, exist_ok=True)

    with client:
        checkpoint = run_ppo(
            config, prompts, client, mode=mode,
            init_checkpoint=init_checkpoint, n_batches=batches,
            log_path=Path(out_dir) / "training_log.jsonl" if out_dir else None,
        )
    save_checkpoint(checkpoint, out_dir)
    last = checkpoint.metrics["batches"][-1] if checkpoint.metrics["batches"] else {}
    click.echo(f"ppo done; last batch: {json.dumps(last, sort_keys=True)}")
    click.echo(f"checkpoint -> {out_dir}")


if __name__ == "__main__":
    main()

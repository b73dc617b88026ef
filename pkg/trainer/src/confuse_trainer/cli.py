"""Command-line entry point for the trainer."""

import json

import click

from confuse_trainer.config import AdapterConfig, Method, TrainConfig
from confuse_trainer.train import train


@click.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True), help="JSON training config")
@click.option("--pairs", "pairs_path", required=True,
              type=click.Path(exists=True), help="preference-pair JSONL")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--resume", is_flag=True,
              help="continue from the checkpoint in --out")
def main(config_path, pairs_path, out_dir, resume):
    """Train LoRA adapters from a preference-pair file."""
    raw = json.loads(open(config_path, encoding="utf-8").read())
    adapter_raw = raw.pop("adapter", {})
    adapter = AdapterConfig(
        rank=adapter_raw.get("rank", 64),
        targets=tuple(adapter_raw.get(
            "targets", AdapterConfig().targets)))
    try:
        config = TrainConfig(adapter=adapter,
                             method=Method(raw.pop("method")), **raw)
    except (KeyError, ValueError) as exc:
        raise click.ClickException(f"bad config: {exc}")
    result = train(config, pairs_path, out_dir, resume=resume)
    click.echo(f"{result.steps} steps, {result.replacements} replacements, "
               f"loss {result.first_loss:.4f} -> "
               f"{result.final_smoothed_loss:.4f}")
    click.echo(f"adapter -> {result.adapter_dir}")


if __name__ == "__main__":
    main()

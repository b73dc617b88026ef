"""Training loops: SFT, DPO, OnlineDPO and InteractDPO.

All methods run single-process; environment calls are synchronous, one
per step. Artifacts are a LoRA adapter directory plus a per-step
`training_log.jsonl`; a checkpoint is written every epoch and on any
environment failure, so interrupted runs resume from a
replacement-consistent state.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path

import httpx
import torch
import torch.nn.functional as F

from confuse_trainer.config import Method, TrainConfig
from confuse_trainer.data import Pair, read_pairs, write_pairs
from confuse_trainer.model import (TinyCharLM, apply_lora, encode,
                                   lora_state_dict)


class EnvUnreachableError(RuntimeError):
    """The environment service failed mid-run; state was checkpointed."""

    def __init__(self, checkpoint: Path, cause: Exception):
        self.checkpoint = checkpoint
        super().__init__(f"environment unreachable ({cause}); resume from "
                         f"{checkpoint}")


@dataclass
class TrainResult:
    adapter_dir: Path
    log_path: Path
    steps: int
    replacements: int
    first_loss: float
    final_smoothed_loss: float


def dpo_loss(policy_chosen: torch.Tensor, policy_rejected: torch.Tensor,
             ref_chosen: torch.Tensor, ref_rejected: torch.Tensor,
             beta: float) -> torch.Tensor:
    margin = (policy_chosen - policy_rejected) - (ref_chosen - ref_rejected)
    return -F.logsigmoid(beta * margin)


def sequence_logprob(model, prompt: str, completion: str,
                     cutoff: int) -> torch.Tensor:
    """Sum of token log-probabilities of the completion given the prompt."""
    prompt_ids = encode(prompt or " ", cutoff)
    completion_ids = encode(completion or " ", cutoff)
    ids = torch.cat([prompt_ids, completion_ids])
    logits = model(ids[:-1].unsqueeze(0))[0]
    targets = ids[1:]
    logprobs = logits.log_softmax(dim=-1)
    start = len(prompt_ids) - 1
    picked = logprobs[torch.arange(start, len(targets)),
                      targets[start:]]
    return picked.sum()


class EnvClient:
    """Thin HTTP client for the interaction environment."""

    def __init__(self, base_url: str, timeout: float = 30.0):
        self.client = httpx.Client(base_url=base_url, timeout=timeout)

    def label(self, case_id: str, inquiry: str) -> dict:
        response = self.client.post("/v1/label", json={
            "case_id": case_id, "inquiry": inquiry})
        response.raise_for_status()
        return response.json()

    def pair(self, case_id: str, inquiry_a: str, inquiry_b: str) -> dict | None:
        response = self.client.post("/v1/pair", json={
            "case_id": case_id, "inquiry_a": inquiry_a,
            "inquiry_b": inquiry_b})
        if response.status_code == 422:  # judge refused; keep the old pair
            return None
        response.raise_for_status()
        return response.json()


def _batches(items: list, size: int):
    for start in range(0, len(items), size):
        yield items[start:start + size]


def _sample_inquiry(model, prompt: str, config: TrainConfig,
                    generator: torch.Generator) -> str:
    text = model.sample(prompt[-256:], config.max_new_tokens,
                        config.sample_temperature, generator).strip()
    return text or "?"


def _step_loss(policy, reference, batch: list[Pair],
               config: TrainConfig) -> torch.Tensor:
    losses = []
    for pair in batch:
        pc = sequence_logprob(policy, pair.prompt, pair.chosen,
                              config.cutoff_length)
        pr = sequence_logprob(policy, pair.prompt, pair.rejected,
                              config.cutoff_length)
        with torch.no_grad():
            rc = sequence_logprob(reference, pair.prompt, pair.chosen,
                                  config.cutoff_length)
            rr = sequence_logprob(reference, pair.prompt, pair.rejected,
                                  config.cutoff_length)
        losses.append(dpo_loss(pc, pr, rc, rr, config.beta))
    return torch.stack(losses).mean()


def _sft_loss(policy, batch: list[Pair], config: TrainConfig) -> torch.Tensor:
    return torch.stack([
        -sequence_logprob(policy, pair.prompt, pair.chosen,
                          config.cutoff_length)
        / max(len(pair.chosen), 1)
        for pair in batch]).mean()


def _save_checkpoint(path: Path, policy, optimizer, epoch: int,
                     pairs: list[Pair], replacements: int,
                     losses: list[float]) -> None:
    torch.save({
        "lora": lora_state_dict(policy),
        "optimizer": optimizer.state_dict(),
        "epoch": epoch,
        "pairs": [p.to_dict() for p in pairs],
        "replacements": replacements,
        "losses": losses,
    }, path)


def train(config: TrainConfig, pairs_path: str | Path,
          out_dir: str | Path, resume: bool = False,
          base_factory=TinyCharLM) -> TrainResult:
    """Run the configured method over a pair file.

    ``base_factory`` builds the base model; the default is the tiny
    CPU-sized transformer.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    checkpoint_path = out_dir / "checkpoint.pt"
    log_path = out_dir / "training_log.jsonl"

    pairs = read_pairs(pairs_path)
    if not pairs:
        raise ValueError(f"pair file {pairs_path} is empty")

    torch.manual_seed(config.seed)
    generator = torch.Generator().manual_seed(config.seed)

    policy = base_factory()
    apply_lora(policy, config.adapter.rank, config.adapter.targets)
    reference = copy.deepcopy(policy)
    reference.eval()
    if config.precision == "bf16":
        policy = policy.to(torch.bfloat16)
        reference = reference.to(torch.bfloat16)

    trainable = [p for p in policy.parameters() if p.requires_grad]
    optimizer = torch.optim.Adam(trainable, lr=config.learning_rate)

    start_epoch = 0
    replacements = 0
    losses: list[float] = []
    if resume and checkpoint_path.exists():
        state = torch.load(checkpoint_path, weights_only=False)
        policy.load_state_dict(state["lora"], strict=False)
        optimizer.load_state_dict(state["optimizer"])
        start_epoch = state["epoch"]
        pairs = [Pair.from_dict(d) for d in state["pairs"]]
        replacements = state["replacements"]
        losses = state["losses"]

    env = EnvClient(config.env_url) if config.env_url else None
    log_mode = "a" if (resume and losses) else "w"
    step = len(losses)

    with open(log_path, log_mode, encoding="utf-8") as log:
        def record(entry: dict) -> None:
            log.write(json.dumps(entry, ensure_ascii=False) + "\n")
            log.flush()

        for epoch in range(start_epoch, config.epochs):
            for batch in _batches(pairs, config.batch_size):
                step += 1
                events = []
                try:
                    if config.method is Method.ONLINE_DPO:
                        pair = batch[0]
                        a = _sample_inquiry(policy, pair.prompt, config,
                                            generator)
                        b = _sample_inquiry(policy, pair.prompt, config,
                                            generator)
                        if a == b:
                            b = b + "?"
                        judged = env.pair(pair.case_id, a, b)
                        if judged is not None:
                            pair.chosen = judged["chosen"]
                            pair.rejected = judged["rejected"]
                            events.append({"event": "judge-paired",
                                           "case_id": pair.case_id})
                    elif config.method is Method.INTERACT_DPO:
                        pair = batch[0]
                        inquiry = _sample_inquiry(policy, pair.prompt,
                                                  config, generator)
                        verdict = env.label(pair.case_id, inquiry)["verdict"]
                        if verdict == "chosen" and inquiry != pair.rejected:
                            pair.chosen = inquiry
                            replacements += 1
                            events.append({"event": "chosen-replaced",
                                           "case_id": pair.case_id,
                                           "inquiry": inquiry})
                        elif verdict == "rejected" and inquiry != pair.chosen:
                            pair.rejected = inquiry
                            replacements += 1
                            events.append({"event": "rejected-replaced",
                                           "case_id": pair.case_id,
                                           "inquiry": inquiry})
                except httpx.HTTPError as exc:
                    _save_checkpoint(checkpoint_path, policy, optimizer,
                                     epoch, pairs, replacements, losses)
                    record({"step": step, "epoch": epoch,
                            "event": "env-failure", "error": str(exc)})
                    raise EnvUnreachableError(checkpoint_path, exc)

                if config.method is Method.SFT:
                    loss = _sft_loss(policy, batch, config)
                else:
                    loss = _step_loss(policy, reference, batch, config)
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
                losses.append(float(loss.detach()))
                record({"step": step, "epoch": epoch, "loss": losses[-1],
                        "method": config.method.value, "events": events,
                        "replacements": replacements})
            _save_checkpoint(checkpoint_path, policy, optimizer, epoch + 1,
                             pairs, replacements, losses)

    adapter_dir = out_dir / "adapter"
    adapter_dir.mkdir(exist_ok=True)
    torch.save(lora_state_dict(policy), adapter_dir / "adapter_state.pt")
    (adapter_dir / "adapter_config.json").write_text(json.dumps({
        "base_model": config.base_model,
        "method": config.method.value,
        "rank": config.adapter.rank,
        "targets": list(config.adapter.targets),
        "learning_rate": config.learning_rate,
        "epochs": config.epochs,
        "cutoff_length": config.cutoff_length,
        "precision": config.precision,
        "beta": config.beta,
        "batch_size": config.batch_size,
        "sample_temperature": config.sample_temperature,
        "seed": config.seed,
    }, indent=2))
    write_pairs(out_dir / "final_pairs.jsonl", pairs)

    tail = losses[-3:] if len(losses) >= 3 else losses
    return TrainResult(
        adapter_dir=adapter_dir, log_path=log_path, steps=step,
        replacements=replacements, first_loss=losses[0],
        final_smoothed_loss=sum(tail) / len(tail),
    )

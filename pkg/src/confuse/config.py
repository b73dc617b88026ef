"""Run configuration: model roles, sampling, retrieval and strategy knobs.

Config files are JSON; CLI flags override file values. All randomness in a
run flows from the single seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from confuse.gateway import (Backend, Gateway, LiveBackend, ModelRef,
                             ReplayBackend, ScriptedBackend)
from confuse.retrieval import PerturbationPolicy


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    models: dict[str, ModelRef]
    generators: list[ModelRef] = field(default_factory=list)
    seed: int = 0
    retrieval_k: int = 5
    perturbation: PerturbationPolicy = field(
        default_factory=lambda: PerturbationPolicy(seed=0))
    capability_by_prompt: bool = True
    n_probes: int = 2
    repeats: int = 3
    few_shot: bool = False
    backend_kind: str = "live"  # live | replay | scripted
    cache_dir: str | None = None
    script: dict[str, str] = field(default_factory=dict)
    rules: list = field(default_factory=list)
    jobs: int = 4

    REQUIRED_ROLES = ("evaluated", "strong", "judge", "user_sim")

    def role(self, name: str) -> ModelRef:
        try:
            return self.models[name]
        except KeyError:
            raise ConfigError(f"config defines no model for role {name!r}")

    def build_gateway(self) -> Gateway:
        backend: Backend
        if self.backend_kind == "live":
            backend = LiveBackend()
        elif self.backend_kind == "replay":
            if not self.cache_dir:
                raise ConfigError("replay backend requires cache_dir")
            backend = ReplayBackend(self.cache_dir, inner=LiveBackend())
        elif self.backend_kind == "scripted":
            if self.rules:
                backend = ScriptedBackend.from_rules(
                    [(p, r) for p, r in self.rules])
                backend.script.update(self.script)
            else:
                backend = ScriptedBackend(self.script)
        else:
            raise ConfigError(f"unknown backend kind {self.backend_kind!r}")
        return Gateway(backend, max_inflight=self.jobs)


def _model_ref(raw: dict | str) -> ModelRef:
    if isinstance(raw, str):
        return ModelRef(name=raw)
    return ModelRef(name=raw["name"],
                    endpoint=raw.get("endpoint", "https://api.openai.com/v1"),
                    api_key_env=raw.get("api_key_env", "OPENAI_API_KEY"))


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}")

    models_raw = raw.get("models", {})
    models = {role: _model_ref(spec) for role, spec in models_raw.items()
              if role != "generators"}
    generators = [_model_ref(g) for g in models_raw.get("generators", [])]

    seed = raw.get("seed")
    if seed is None:
        raise ConfigError("config must set a seed")

    pert = raw.get("perturbation", {})
    policy = PerturbationPolicy(
        drop_probability=pert.get("drop_probability", 0.5),
        target_size=pert.get("target_size", 5),
        seed=pert.get("seed", seed),
    )
    strategy = raw.get("strategy", {})
    backend = raw.get("backend", {})
    return RunConfig(
        models=models,
        generators=generators,
        seed=seed,
        retrieval_k=raw.get("retrieval", {}).get("k", 5),
        perturbation=policy,
        capability_by_prompt=strategy.get("capability_by_prompt", True),
        n_probes=strategy.get("n_probes", 2),
        repeats=strategy.get("repeats", 3),
        few_shot=strategy.get("few_shot", False),
        backend_kind=backend.get("kind", "live"),
        cache_dir=backend.get("cache_dir"),
        script=backend.get("script", {}),
        rules=backend.get("rules", []),
        jobs=raw.get("jobs", 4),
    )

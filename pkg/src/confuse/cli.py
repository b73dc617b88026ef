"""Command-line entry point: index, build, judge, resolve, eval, dpo-seed,
serve-env, report."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from confuse import model as m
from confuse import retrieval as rt
from confuse.config import ConfigError, RunConfig, load_config
from confuse.judge import JudgeConfig, judge_source
from confuse.model import Strategy


def _load(config_path: str) -> RunConfig:
    try:
        return load_config(config_path)
    except ConfigError as exc:
        raise click.ClickException(str(exc))


def _require_roles(cfg: RunConfig, roles=RunConfig.REQUIRED_ROLES) -> None:
    missing = [r for r in roles if r not in cfg.models]
    if missing:
        raise click.ClickException(f"config missing model roles: {missing}")


def _judge_config(cfg: RunConfig) -> JudgeConfig:
    return JudgeConfig(capability_by_prompt=cfg.capability_by_prompt,
                       n_probes=cfg.n_probes, few_shot=cfg.few_shot)


@click.group()
def main():
    """Diagnose and resolve LLM uncertainty on (query, documents) cases."""


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def index(corpus_path, out_path):
    """Build a BM25 index from a JSONL document file."""
    docs = [m.Document.from_dict(r) for r in m.read_jsonl(corpus_path)]
    corpus = rt.ingest(docs)
    rt.save_index(corpus, out_path)
    click.echo(f"indexed {len(corpus)} documents -> {out_path}")


@main.command()
@click.option("--raw", "raw_path", required=True, type=click.Path(exists=True))
@click.option("--corpus", "index_path", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--quota", "quota_path", type=click.Path(exists=True))
@click.option("--out-bench", required=True, type=click.Path())
@click.option("--out-train", required=True, type=click.Path())
@click.option("--dry-run", is_flag=True)
def build(raw_path, index_path, config_path, quota_path, out_bench, out_train,
          dry_run):
    """Label raw items and assemble the benchmark/training splits.

    Raw JSONL fields: id, dataset, query, gold_documents[], gold_answer.
    """
    from confuse.bench import (EXCLUDED, QuotaSpec, assemble_benchmark,
                               classify_raw_case, generate_gold_inquiry)
    from dataclasses import replace

    cfg = _load(config_path)
    _require_roles(cfg, ("evaluated", "judge"))
    corpus = rt.load_index(index_path)
    raw_items = m.read_jsonl(raw_path)
    if dry_run:
        click.echo(f"config ok; {len(raw_items)} raw items, "
                   f"{len(corpus)} indexed documents")
        return
    gateway = cfg.build_gateway()
    labeled = []
    for item in raw_items:
        result = classify_raw_case(
            gateway, str(item["id"]), m.Dataset.parse(item["dataset"]),
            item["query"],
            [m.Document.from_dict(d) for d in item["gold_documents"]],
            item["gold_answer"], cfg.role("evaluated"), cfg.role("judge"),
            corpus, cfg.perturbation)
        if result is EXCLUDED:
            continue
        gold_inq = generate_gold_inquiry(gateway, result, cfg.role("judge"))
        labeled.append(replace(result, gold_inquiry=gold_inq.as_field()))

    if quota_path:
        quota_raw = json.loads(Path(quota_path).read_text())
        per_dataset = {
            m.Dataset.parse(ds): {
                m.UncertaintySource(label): count
                for label, count in spec.items()}
            for ds, spec in quota_raw["per_dataset"].items()}
        quota = QuotaSpec(per_dataset=per_dataset,
                          seed=quota_raw.get("seed", cfg.seed))
        bench_cases, train_cases = assemble_benchmark(labeled, quota)
    else:
        bench_cases, train_cases = labeled, []
    m.write_cases(out_bench, bench_cases)
    m.write_cases(out_train, train_cases)
    click.echo(f"{len(bench_cases)} benchmark cases, "
               f"{len(train_cases)} training cases")


@main.command()
@click.option("--bench", "bench_path", required=True, type=click.Path(exists=True))
@click.option("--strategy", type=click.Choice(["prompt", "inquiry", "answer"]),
              default="answer")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--dry-run", is_flag=True)
def judge(bench_path, strategy, config_path, out_path, dry_run):
    """Judge the uncertainty source for every benchmark case."""
    cfg = _load(config_path)
    _require_roles(cfg, ("evaluated", "judge"))
    cases = m.read_cases(bench_path)
    if dry_run:
        click.echo(f"config ok; {len(cases)} cases")
        return
    gateway = cfg.build_gateway()
    judgments = [judge_source(gateway, case, Strategy(strategy),
                              cfg.role("evaluated"), cfg.role("judge"),
                              _judge_config(cfg))
                 for case in cases]
    m.write_jsonl(out_path, [j.to_dict() for j in judgments])
    click.echo(f"{len(judgments)} judgments -> {out_path}")


@main.command()
@click.option("--bench", "bench_path", required=True, type=click.Path(exists=True))
@click.option("--judgments", "judgments_path", required=True,
              type=click.Path(exists=True))
@click.option("--index", "index_path", type=click.Path(exists=True))
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--dry-run", is_flag=True)
def resolve(bench_path, judgments_path, index_path, config_path, out_path,
            dry_run):
    """Route judged cases to their remedy and produce final answers."""
    from confuse.resolver import UserSimConfig, resolve as resolve_case

    cfg = _load(config_path)
    _require_roles(cfg, ("evaluated", "user_sim"))
    cases = {c.id: c for c in m.read_cases(bench_path)}
    judgments = [m.Judgment.from_dict(r) for r in m.read_jsonl(judgments_path)]
    corpus = rt.load_index(index_path) if index_path else None
    if dry_run:
        click.echo(f"config ok; {len(cases)} cases, {len(judgments)} judgments")
        return
    gateway = cfg.build_gateway()
    user_sim = UserSimConfig(model=cfg.role("user_sim"))
    transcripts = []
    for judgment in judgments:
        case = cases.get(judgment.case_id)
        if case is None:
            raise click.ClickException(f"judgment for unknown case "
                                       f"{judgment.case_id!r}")
        transcripts.append(resolve_case(gateway, case, judgment,
                                        cfg.role("evaluated"), user_sim,
                                        corpus, k=cfg.retrieval_k))
    m.write_jsonl(out_path, [t.to_dict() for t in transcripts])
    click.echo(f"{len(transcripts)} transcripts -> {out_path}")


@main.command("eval")
@click.option("--bench", "bench_path", required=True, type=click.Path(exists=True))
@click.option("--strategy", type=click.Choice(["prompt", "inquiry", "answer"]),
              default="answer")
@click.option("--index", "index_path", type=click.Path(exists=True))
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--repeats", type=int, default=None)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--dry-run", is_flag=True)
def eval_cmd(bench_path, strategy, index_path, config_path, repeats, out_path,
             dry_run):
    """Full evaluation: judge, resolve, dual-answer and score, repeated."""
    from confuse.evaluator import EvalModels, run_eval, write_report

    cfg = _load(config_path)
    _require_roles(cfg)
    cases = m.read_cases(bench_path)
    unlabeled = [c.id for c in cases if c.label is None]
    if unlabeled:
        raise click.ClickException(f"cases without labels: {unlabeled[:5]}")
    corpus = rt.load_index(index_path) if index_path else None
    if dry_run:
        click.echo(f"config ok; {len(cases)} labeled cases")
        return
    gateway = cfg.build_gateway()
    models = EvalModels(evaluated=cfg.role("evaluated"),
                        strong=cfg.role("strong"), judge=cfg.role("judge"),
                        user_sim=cfg.role("user_sim"))
    report = run_eval(gateway, cases, Strategy(strategy), models, corpus,
                      repeats=repeats or cfg.repeats, seed=cfg.seed,
                      config=_judge_config(cfg))
    write_report(out_path, report)
    click.echo(f"avg AQ {report['avg_aq']:.4f}  avg UCA {report['avg_uca']:.4f} "
               f"-> {out_path}")


@main.command("dpo-seed")
@click.option("--train", "train_path", required=True, type=click.Path(exists=True))
@click.option("--index", "index_path", type=click.Path(exists=True))
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--dry-run", is_flag=True)
def dpo_seed(train_path, index_path, config_path, out_path, dry_run):
    """Collect seed preference pairs from the training split."""
    from confuse.dpo import LabelingContext, collect_seed_pairs

    cfg = _load(config_path)
    _require_roles(cfg, ("evaluated", "judge", "user_sim"))
    if len(cfg.generators) < 2:
        raise click.ClickException("config must list at least 2 generators")
    cases = m.read_cases(train_path)
    corpus = rt.load_index(index_path) if index_path else None
    if dry_run:
        click.echo(f"config ok; {len(cases)} training cases, "
                   f"{len(cfg.generators)} generators")
        return
    ctx = LabelingContext(gateway=cfg.build_gateway(),
                          answer_model=cfg.role("evaluated"),
                          judge=cfg.role("judge"),
                          user_sim=cfg.role("user_sim"), corpus=corpus)
    pairs = collect_seed_pairs(ctx, cases, cfg.generators)
    m.write_jsonl(out_path, [p.to_dict() for p in pairs])
    click.echo(f"{len(pairs)} preference pairs -> {out_path}")


@main.command("serve-env")
@click.option("--cases", "cases_path", required=True, type=click.Path(exists=True))
@click.option("--index", "index_path", type=click.Path(exists=True))
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8765)
def serve_env(cases_path, index_path, config_path, host, port):
    """Serve the interaction-environment HTTP API (blocking)."""
    from confuse.dpo import LabelingContext, serve_environment

    cfg = _load(config_path)
    _require_roles(cfg, ("evaluated", "judge", "user_sim"))
    case_store = {c.id: c for c in m.read_cases(cases_path)}
    corpus = rt.load_index(index_path) if index_path else None
    ctx = LabelingContext(gateway=cfg.build_gateway(),
                          answer_model=cfg.role("evaluated"),
                          judge=cfg.role("judge"),
                          user_sim=cfg.role("user_sim"), corpus=corpus)
    serve_environment(ctx, case_store, host=host, port=port)


@main.command()
@click.option("--report", "report_path", required=True,
              type=click.Path(exists=True))
def report(report_path):
    """Print a summary table from an eval report."""
    data = json.loads(Path(report_path).read_text(encoding="utf-8"))
    click.echo(f"strategy={data['strategy']}  repeats={data['repeats']}")
    click.echo(f"{'dataset':<12} {'AQ':>7} {'UCA':>7} {'IQ':>7} {'wF1':>7}")
    for name, metrics in sorted(data["averaged"].items()):
        iq = metrics.get("iq")
        click.echo(f"{name:<12} {metrics['aq']:>7.4f} {metrics['uca']:>7.4f} "
                   f"{(f'{iq:.4f}' if iq is not None else '-'):>7} "
                   f"{metrics['weighted_f1']:>7.4f}")
    click.echo(f"{'avg':<12} {data['avg_aq']:>7.4f} {data['avg_uca']:>7.4f}")


if __name__ == "__main__":
    sys.exit(main())

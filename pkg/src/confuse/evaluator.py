"""Metrics: answer quality, classification accuracy, inquiry quality,
per-class precision/recall and weighted F1, with the repeated-run protocol.

Per-case failures are excluded from denominators and surfaced as an error
count; transport failures must not masquerade as method failures.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from confuse import prompts
from confuse.gateway import Gateway, ModelRef, SamplingParams, JUDGE_PARAMS
from confuse.judge import JudgeConfig, judge_source
from confuse.model import (Case, Dataset, Judgment, Strategy,
                           UncertaintySource, QA_DATASETS)
from confuse.resolver import UserSimConfig, dual_answer, resolve
from confuse.retrieval import Corpus


class ScoreRangeError(Exception):
    pass


def _judge_int(gateway: Gateway, judge: ModelRef, prompt: str, key: str,
               valid: range) -> int:
    """Ask for an integer score, re-ask once if out of range, then error."""
    for attempt in range(2):
        obj = gateway.ask_structured(judge, prompt, JUDGE_PARAMS, [key])
        try:
            value = int(str(obj[key]).strip())
        except ValueError:
            value = None
        if value in valid:
            return value
        prompt = prompt + f"\nYour score must be an integer in {list(valid)}."
    raise ScoreRangeError(f"judge returned out-of-range {key}: {obj[key]!r}")


def score_answer(gateway: Gateway, case: Case, answer: str,
                 judge: ModelRef) -> float:
    """Binary correctness for QA datasets, normalized 1-4 usefulness else."""
    if not answer:
        raise ValueError("answer must be non-empty")
    if case.dataset in QA_DATASETS:
        obj = gateway.ask_structured(
            judge,
            prompts.JUDGE_CORRECTNESS.format(query=case.actual_query,
                                             gold_answer=case.gold_answer,
                                             answer=answer),
            JUDGE_PARAMS, ["correct"])
        return 1.0 if str(obj["correct"]).strip().lower().startswith("y") else 0.0
    prompt = prompts.JUDGE_USEFULNESS.format(query=case.actual_query,
                                             gold_answer=case.gold_answer,
                                             answer=answer)
    raw = _judge_int(gateway, judge, prompt, "usefulness", range(1, 5))
    return (raw - 1) / 3


def score_inquiry(gateway: Gateway, case: Case, inquiry: str,
                  judge: ModelRef) -> float:
    """1-5 inquiry quality against the gold inquiry, normalized to [0,1].

    The length penalty is applied by the judge per the scoring rubric.
    """
    if not case.gold_inquiry:
        raise ValueError("case has no gold inquiry")
    prompt = prompts.EVALUATE_INQUIRY.format(
        original_query=case.original_query,
        gold_documents=prompts.render_documents(case.gold_documents),
        actual_query=case.actual_query,
        actual_documents=prompts.render_documents(case.actual_documents),
        gold_inquiry=case.gold_inquiry,
        inquiry=inquiry,
    )
    raw = _judge_int(gateway, judge, prompt, "quality of inquiry", range(1, 6))
    return (raw - 1) / 4


SOURCES = (UncertaintySource.DOCUMENT, UncertaintySource.AMBIGUITY,
           UncertaintySource.CAPABILITY)


def classification_metrics(judgments: list[Judgment],
                           gold: dict[str, UncertaintySource]) -> dict:
    """UCA, per-class precision/recall and support-weighted F1 from the
    3x3 confusion matrix. Undefined ratios are 0."""
    confusion = {g: {p: 0 for p in SOURCES} for g in SOURCES}
    correct = 0
    for judgment in judgments:
        if judgment.case_id not in gold:
            raise KeyError(f"no gold label for case {judgment.case_id!r}")
        g = gold[judgment.case_id]
        confusion[g][judgment.predicted] += 1
        if g == judgment.predicted:
            correct += 1

    n = len(judgments)
    precision, recall, f1 = {}, {}, {}
    for source in SOURCES:
        tp = confusion[source][source]
        predicted_total = sum(confusion[g][source] for g in SOURCES)
        support = sum(confusion[source].values())
        precision[source] = tp / predicted_total if predicted_total else 0.0
        recall[source] = tp / support if support else 0.0
        denom = precision[source] + recall[source]
        f1[source] = (2 * precision[source] * recall[source] / denom
                      if denom else 0.0)

    weighted_f1 = sum(sum(confusion[s].values()) / n * f1[s]
                      for s in SOURCES) if n else 0.0
    return {
        "uca": correct / n if n else 0.0,
        "precision": {s.value: precision[s] for s in SOURCES},
        "recall": {s.value: recall[s] for s in SOURCES},
        "weighted_f1": weighted_f1,
        "confusion": {g.value: {p.value: confusion[g][p] for p in SOURCES}
                      for g in SOURCES},
    }


def macro_average(per_dataset: dict[str, float]) -> float:
    """Unweighted mean over datasets (the report's "avg" column)."""
    values = list(per_dataset.values())
    return sum(values) / len(values) if values else 0.0


@dataclass
class EvalModels:
    evaluated: ModelRef
    strong: ModelRef
    judge: ModelRef
    user_sim: ModelRef


def _mean(values: list[float]) -> float:
    return sum(values) / len(values) if values else 0.0


def evaluate_once(gateway: Gateway, bench: list[Case], strategy: Strategy,
                  models: EvalModels, corpus: Corpus | None,
                  config: JudgeConfig | None = None,
                  params: SamplingParams = JUDGE_PARAMS,
                  max_failure_rate: float = 0.10) -> dict:
    """One full pass: judge, resolve, dual-answer and score every case."""
    config = config or JudgeConfig()
    user_sim = UserSimConfig(model=models.user_sim)
    per_case: list[dict] = []
    judgments: list[Judgment] = []
    errors = 0
    for case in bench:
        try:
            judgment = judge_source(gateway, case, strategy, models.evaluated,
                                    models.judge, config, params)
            transcript = resolve(gateway, case, judgment, models.evaluated,
                                 user_sim, corpus)
            answer, aq = dual_answer(gateway, case, transcript,
                                     models.evaluated, models.strong,
                                     models.judge)
            iq = None
            if judgment.inquiry and case.gold_inquiry:
                iq = score_inquiry(gateway, case, judgment.inquiry, models.judge)
        except Exception as exc:  # noqa: BLE001 - per-case isolation
            errors += 1
            per_case.append({"case_id": case.id, "dataset": case.dataset.value,
                             "error": f"{type(exc).__name__}: {exc}"})
            if errors > max_failure_rate * len(bench):
                raise RuntimeError(
                    f"aborting repeat: {errors} case failures "
                    f"(> {max_failure_rate:.0%} of {len(bench)})") from exc
            continue
        judgments.append(judgment)
        per_case.append({
            "case_id": case.id,
            "dataset": case.dataset.value,
            "predicted": judgment.predicted.value,
            "label": case.label.value if case.label else None,
            "channel": (transcript.turns[0].channel.value if transcript.turns
                        else "none"),
            "inquiry": judgment.inquiry,
            "answer": answer,
            "aq": aq,
            "iq": iq,
        })

    by_dataset: dict[str, dict] = {}
    datasets = sorted({row["dataset"] for row in per_case if "error" not in row})
    for name in datasets:
        rows = [r for r in per_case if r.get("dataset") == name and "error" not in r]
        case_ids = {r["case_id"] for r in rows}
        ds_judgments = [j for j in judgments if j.case_id in case_ids]
        gold = {c.id: c.label for c in bench
                if c.id in case_ids and c.label is not None}
        cls = (classification_metrics(
                   [j for j in ds_judgments if j.case_id in gold], gold)
               if gold else {"uca": 0.0, "precision": {}, "recall": {},
                             "weighted_f1": 0.0})
        iq_values = [r["iq"] for r in rows if r["iq"] is not None]
        by_dataset[name] = {
            "aq": _mean([r["aq"] for r in rows]),
            "uca": cls["uca"],
            "iq": _mean(iq_values) if iq_values else None,
            "precision": cls["precision"],
            "recall": cls["recall"],
            "weighted_f1": cls["weighted_f1"],
            "n_cases": len(rows),
        }
    return {"per_dataset": by_dataset, "per_case": per_case, "errors": errors}


def _average_repeats(repeat_rows: list[dict]) -> dict:
    """Field-wise arithmetic mean of per-dataset metrics over repeats."""
    datasets = sorted({name for row in repeat_rows for name in row})
    averaged = {}
    for name in datasets:
        entries = [row[name] for row in repeat_rows if name in row]
        iqs = [e["iq"] for e in entries if e.get("iq") is not None]
        averaged[name] = {
            "aq": _mean([e["aq"] for e in entries]),
            "uca": _mean([e["uca"] for e in entries]),
            "iq": _mean(iqs) if iqs else None,
            "precision": {s.value: _mean([e["precision"].get(s.value, 0.0)
                                          for e in entries]) for s in SOURCES},
            "recall": {s.value: _mean([e["recall"].get(s.value, 0.0)
                                       for e in entries]) for s in SOURCES},
            "weighted_f1": _mean([e["weighted_f1"] for e in entries]),
            "n_cases": entries[0]["n_cases"],
        }
    return averaged


def run_eval(gateway: Gateway, bench: list[Case], strategy: Strategy,
             models: EvalModels, corpus: Corpus | None = None,
             repeats: int = 3, seed: int = 0,
             config: JudgeConfig | None = None) -> dict:
    """Repeat the evaluation and average per-dataset metrics.

    Returns a JSON-serializable report with per-repeat and averaged
    metrics plus full per-case rows for audit.
    """
    if not bench:
        raise ValueError("benchmark must be non-empty")
    repeat_reports = []
    for i in range(repeats):
        params = SamplingParams(temperature=0.7, max_tokens=1024, seed=seed + i)
        repeat_reports.append(
            evaluate_once(gateway, bench, strategy, models, corpus, config,
                          params))
    averaged = _average_repeats([r["per_dataset"] for r in repeat_reports])
    aq_by_dataset = {name: m["aq"] for name, m in averaged.items()}
    uca_by_dataset = {name: m["uca"] for name, m in averaged.items()}
    return {
        "strategy": strategy.value,
        "repeats": repeats,
        "seed": seed,
        "averaged": averaged,
        "avg_aq": macro_average(aq_by_dataset),
        "avg_uca": macro_average(uca_by_dataset),
        "per_repeat": repeat_reports,
    }


def write_report(path, report: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, ensure_ascii=False, sort_keys=True)
        fh.write("\n")

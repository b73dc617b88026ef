"""Construct labeled cases: capability and document-scarcity labeling,
AMR-based query ambiguation with validation, gold inquiries, and
quota-based benchmark assembly.

Benchmark selection is seeded random sampling; the original corpus was
hand-picked, so published case lists are not reproduced.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from confuse import prompts
from confuse.gateway import Gateway, ModelRef, SamplingParams, JUDGE_PARAMS
from confuse.model import (Case, Dataset, Document, Split, UncertaintySource)
from confuse.resolver import answer_query
from confuse.evaluator import score_answer
from confuse.retrieval import Corpus, PerturbationPolicy, perturb_documents
from confuse.model import InteractionTranscript


class DegenerateAmbiguationError(Exception):
    """The obscured query is the original query; retry with a new seed."""


class QuotaShortfallError(Exception):
    def __init__(self, dataset: Dataset, label: UncertaintySource,
                 available: int, wanted: int):
        self.dataset = dataset
        self.label = label
        super().__init__(
            f"pool for {dataset.value}/{label.value} has {available} cases, "
            f"quota wants {wanted}")


@dataclass(frozen=True)
class AmbiguationResult:
    amr: str
    obscured_query: str
    clarification: str
    thinking: str


@dataclass(frozen=True)
class GoldInquiry:
    inquiry: str
    missing_information: str

    def as_field(self) -> str:
        """Rendering stored on the case; the IQ rubric consumes both parts."""
        return (f"Missing Detail: {self.missing_information}\n"
                f"Gold Inquiry: {self.inquiry}")


@dataclass(frozen=True)
class QuotaSpec:
    per_dataset: dict[Dataset, dict[UncertaintySource, int]]
    seed: int = 0

    @classmethod
    def uniform(cls, datasets: list[Dataset], document: int, ambiguity: int,
                capability: int, seed: int = 0) -> "QuotaSpec":
        return cls(per_dataset={
            ds: {UncertaintySource.DOCUMENT: document,
                 UncertaintySource.AMBIGUITY: ambiguity,
                 UncertaintySource.CAPABILITY: capability}
            for ds in datasets}, seed=seed)


EXCLUDED = object()  # sentinel: the raw case carries no uncertainty


def _answer_correct(gateway: Gateway, case: Case, model: ModelRef,
                    judge: ModelRef, threshold: float = 1.0) -> bool:
    answer = answer_query(gateway, case, InteractionTranscript(
        case_id=case.id, turns=(), final_answer=""), model)
    return score_answer(gateway, case, answer, judge) >= threshold


def classify_raw_case(gateway: Gateway, case_id: str, dataset: Dataset,
                      query: str, gold_docs: list[Document], gold_answer: str,
                      model: ModelRef, judge: ModelRef, corpus: Corpus,
                      policy: PerturbationPolicy,
                      success_threshold: float = 1.0):
    """Label one raw (query, gold docs, answer) item.

    Wrong with gold documents: capability case. Right with gold but wrong
    after perturbation: document case. Right both times: excluded (no
    uncertainty for this model).
    """
    if not gold_answer:
        raise ValueError("gold_answer must be non-empty")
    gold = tuple(Document(d.doc_id, d.title, d.body, is_gold=True)
                 for d in gold_docs)
    base = Case(id=case_id, dataset=dataset, original_query=query,
                actual_query=query, gold_documents=gold, actual_documents=gold,
                gold_answer=gold_answer, split=Split.TRAINING)

    if not _answer_correct(gateway, base, model, judge, success_threshold):
        return Case(id=case_id, dataset=dataset, original_query=query,
                    actual_query=query, gold_documents=gold,
                    actual_documents=gold, gold_answer=gold_answer,
                    label=UncertaintySource.CAPABILITY, split=Split.TRAINING)

    perturbed = perturb_documents(list(gold), corpus, query, policy)
    doc_case = Case(id=case_id, dataset=dataset, original_query=query,
                    actual_query=query, gold_documents=gold,
                    actual_documents=perturbed.documents,
                    gold_answer=gold_answer,
                    label=UncertaintySource.DOCUMENT, split=Split.TRAINING)
    if not _answer_correct(gateway, doc_case, model, judge, success_threshold):
        return doc_case
    return EXCLUDED


def generate_amr(gateway: Gateway, query: str, model: ModelRef) -> str:
    obj = gateway.ask_structured(
        model, prompts.AMR_GENERATION.format(query=query), JUDGE_PARAMS,
        ["Abstract Meaning Representation (AMR)"])
    return str(obj["Abstract Meaning Representation (AMR)"]).strip()


def _normalized(text: str) -> str:
    return " ".join(text.lower().split())


def ambiguate_query(gateway: Gateway, query: str, model: ModelRef) -> AmbiguationResult:
    """Two-stage pipeline: query -> AMR -> obscured AMR -> obscured query.

    The clarification is derived as the difference statement between the
    original and obscured query via the gold-inquiry template.
    """
    if not query:
        raise ValueError("query must be non-empty")
    amr = generate_amr(gateway, query, model)
    obj = gateway.ask_structured(
        model, prompts.AMBIGUATE_AMR.format(query=query, amr=amr), JUDGE_PARAMS,
        ["Obscured Abstract Meaning Representation (AMR)",
         "Translated Text Query"])
    obscured = str(obj["Translated Text Query"]).strip()
    if _normalized(obscured) == _normalized(query):
        raise DegenerateAmbiguationError(
            f"obscured query equals the original: {query!r}")
    diff = gateway.ask_structured(
        model, prompts.GOLD_INQUIRY.format(
            original_query=query, gold_documents="(unchanged)",
            actual_query=obscured, actual_documents="(unchanged)"),
        JUDGE_PARAMS, ["missing information"])
    clarification = str(diff["missing information"]).strip()
    return AmbiguationResult(
        amr=str(obj["Obscured Abstract Meaning Representation (AMR)"]),
        obscured_query=obscured,
        clarification=clarification,
        thinking=str(obj.get("step_by_step_thinking", "")),
    )


@dataclass(frozen=True)
class ObscurityCheck:
    success: bool
    reason: str


def validate_obscurity(gateway: Gateway, original_query: str, gold_answer: str,
                       obscured_query: str, clarification: str,
                       model: ModelRef, judge: ModelRef,
                       n_samples: int = 3) -> ObscurityCheck:
    """Check an obscured query: unanswerable as is, answerable once
    clarified. Samples answers for all three conditions and applies the
    success/failure rubric via the judge model."""
    for name, value in (("original_query", original_query),
                        ("gold_answer", gold_answer),
                        ("obscured_query", obscured_query),
                        ("clarification", clarification)):
        if not value:
            raise ValueError(f"{name} must be non-empty")
    if _normalized(obscured_query) == _normalized(original_query):
        return ObscurityCheck(False, "obscured query equals the original")

    def sample(prompt: str) -> list[str]:
        params = SamplingParams(temperature=0.7, max_tokens=256)
        return [gateway.ask(model, prompt, params) for _ in range(n_samples)]

    original_answers = sample(f"{original_query}\nAnswer within 50 tokens, "
                              f"or respond {prompts.NO_RESPONSE} if you cannot.")
    obscured_answers = sample(f"{obscured_query}\nAnswer within 50 tokens, "
                              f"or respond {prompts.NO_RESPONSE} if you cannot.")
    clarified_query = f"{obscured_query} ({clarification})"
    clarified_answers = sample(f"{clarified_query}\nAnswer within 50 tokens, "
                               f"or respond {prompts.NO_RESPONSE} if you cannot.")

    obj = gateway.ask_structured(
        judge, prompts.CHECK_OBSCURITY.format(
            original_query=original_query,
            original_answers=" | ".join(original_answers),
            obscured_query=obscured_query,
            obscured_answers=" | ".join(obscured_answers),
            clarified_query=clarified_query,
            clarified_answers=" | ".join(clarified_answers),
        ), JUDGE_PARAMS, ["answer"])
    verdict = str(obj["answer"]).strip().lower()
    if verdict.startswith("success"):
        return ObscurityCheck(True, "")
    return ObscurityCheck(False, str(obj["answer"]))


def generate_gold_inquiry(gateway: Gateway, case: Case,
                          model: ModelRef) -> GoldInquiry:
    """Derive the reference inquiry from what the case hides."""
    obj = gateway.ask_structured(
        model, prompts.GOLD_INQUIRY.format(
            original_query=case.original_query,
            gold_documents=prompts.render_documents(case.gold_documents),
            actual_query=case.actual_query,
            actual_documents=prompts.render_documents(case.actual_documents),
        ), JUDGE_PARAMS, ["missing information", "inquiry"])
    return GoldInquiry(inquiry=str(obj["inquiry"]).strip(),
                       missing_information=str(obj["missing information"]).strip())


def assemble_benchmark(cases: list[Case], quota: QuotaSpec) -> tuple[list[Case], list[Case]]:
    """Fill each (dataset, label) quota by seeded sampling without
    replacement; everything unselected goes to the training split."""
    rng = random.Random(quota.seed)
    pools: dict[tuple[Dataset, UncertaintySource], list[Case]] = {}
    for case in cases:
        if case.label is None:
            continue
        pools.setdefault((case.dataset, case.label), []).append(case)

    selected_ids: set[str] = set()
    benchmark: list[Case] = []
    for dataset in sorted(quota.per_dataset, key=lambda d: d.value):
        for label in sorted(quota.per_dataset[dataset]):
            wanted = quota.per_dataset[dataset][label]
            if wanted == 0:
                continue
            pool = pools.get((dataset, label), [])
            if len(pool) < wanted:
                raise QuotaShortfallError(dataset, label, len(pool), wanted)
            picked = rng.sample(pool, wanted)
            benchmark.extend(picked)
            selected_ids.update(c.id for c in picked)

    from dataclasses import replace
    benchmark = [replace(c, split=Split.BENCHMARK) for c in benchmark]
    training = [replace(c, split=Split.TRAINING) for c in cases
                if c.label is not None and c.id not in selected_ids]
    return benchmark, training

"""Preference-pair factory and the interaction-environment service.

Seed pairs come from multiple generator models whose inquiries are played
through the case's gold channel and scored; the chosen/rejected label is
the real interaction outcome, not a judge's opinion. The judge-paired
variant exists as a baseline. The HTTP service exposes labeling to an
external trainer.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

from confuse import prompts
from confuse.gateway import Gateway, ModelRef, JUDGE_PARAMS
from confuse.model import (Case, Channel, InteractionTranscript, Judgment,
                           Split, Strategy, Turn, UncertaintySource,
                           QA_DATASETS)
from confuse.resolver import UserSimConfig, answer_query, resolve
from confuse.evaluator import score_answer
from confuse.retrieval import Corpus

logger = logging.getLogger(__name__)


class Provenance(Enum):
    SEED = "seed"
    ON_POLICY = "on-policy"
    ONLINE_JUDGE = "online-judge"


class Verdict(Enum):
    CHOSEN = "chosen"
    REJECTED = "rejected"


class UnsupportedCaseError(ValueError):
    """Capability cases have no interaction channel to label through."""


@dataclass(frozen=True)
class PreferencePair:
    case_id: str
    prompt: str
    chosen: str
    rejected: str
    provenance: Provenance

    def __post_init__(self):
        if self.chosen == self.rejected:
            raise ValueError("chosen and rejected must differ")
        if not self.prompt:
            raise ValueError("prompt must be non-empty")

    def to_dict(self) -> dict:
        return {"case_id": self.case_id, "prompt": self.prompt,
                "chosen": self.chosen, "rejected": self.rejected,
                "provenance": self.provenance.value}

    @classmethod
    def from_dict(cls, d: dict) -> "PreferencePair":
        return cls(case_id=str(d["case_id"]), prompt=d["prompt"],
                   chosen=d["chosen"], rejected=d["rejected"],
                   provenance=Provenance(d["provenance"]))


@dataclass(frozen=True)
class LabelResponse:
    verdict: Verdict
    resolved_answer: str
    score: float


def render_pair_prompt(case: Case) -> str:
    """The inquiry-generation template, fully rendered, so the trainer
    needs no template logic of its own."""
    return prompts.GENERATE_INQUIRY.format(
        query=case.actual_query,
        documents=prompts.render_documents(case.actual_documents))


def success_threshold(case: Case) -> float:
    """Binary datasets need a fully correct answer; graded ones 2/3."""
    return 1.0 if case.dataset in QA_DATASETS else 2.0 / 3.0


@dataclass
class LabelingContext:
    gateway: Gateway
    answer_model: ModelRef
    judge: ModelRef
    user_sim: ModelRef
    corpus: Corpus | None = None


def label_candidate(ctx: LabelingContext, case: Case, inquiry: str,
                    threshold: float | None = None) -> LabelResponse:
    """Play an inquiry through the case's gold channel and score the
    resulting answer. Chosen iff the score clears the dataset threshold."""
    if not inquiry:
        raise ValueError("inquiry must be non-empty")
    if case.label is None or case.label is UncertaintySource.CAPABILITY:
        raise UnsupportedCaseError(
            f"case {case.id!r} has label "
            f"{case.label.value if case.label else None}; labeling needs a "
            "document or ambiguity case")
    threshold = success_threshold(case) if threshold is None else threshold

    judgment = Judgment(case_id=case.id, strategy=Strategy.INQUIRY,
                        predicted=case.label, samples=(case.label,),
                        inquiry=inquiry)
    transcript = resolve(ctx.gateway, case, judgment, ctx.answer_model,
                         UserSimConfig(model=ctx.user_sim), ctx.corpus)
    score = score_answer(ctx.gateway, case, transcript.final_answer, ctx.judge)
    verdict = Verdict.CHOSEN if score >= threshold else Verdict.REJECTED
    return LabelResponse(verdict=verdict,
                         resolved_answer=transcript.final_answer, score=score)


def collect_seed_pairs(ctx: LabelingContext, cases: list[Case],
                       generators: list[ModelRef]) -> list[PreferencePair]:
    """Build the offline preference set.

    A case is eligible when it cannot be answered without an inquiry but
    at least one generator's inquiry solves it; succeeding inquiries then
    pair against each failing one.
    """
    if len(generators) < 2:
        raise ValueError("need at least 2 generator models")
    pairs: list[PreferencePair] = []
    for case in cases:
        if case.label is None or case.label is UncertaintySource.CAPABILITY:
            continue
        baseline = answer_query(ctx.gateway, case, InteractionTranscript(
            case_id=case.id, turns=(), final_answer=""), ctx.answer_model)
        baseline_score = score_answer(ctx.gateway, case, baseline, ctx.judge)
        if baseline_score >= success_threshold(case):
            continue  # no uncertainty left to solve for this model

        succeeded: list[str] = []
        failed: list[str] = []
        for generator in generators:
            from confuse.judge import generate_inquiry
            proposal = generate_inquiry(ctx.gateway, case, generator)
            result = label_candidate(ctx, case, proposal.inquiry)
            (succeeded if result.verdict is Verdict.CHOSEN
             else failed).append(proposal.inquiry)
        prompt = render_pair_prompt(case)
        for chosen in succeeded:
            for rejected in failed:
                if chosen != rejected:
                    pairs.append(PreferencePair(
                        case_id=case.id, prompt=prompt, chosen=chosen,
                        rejected=rejected, provenance=Provenance.SEED))
    return pairs


def pair_online(gateway: Gateway, case: Case, inquiry_a: str, inquiry_b: str,
                judge: ModelRef) -> PreferencePair | None:
    """Judge-paired baseline: no interaction, no real feedback. Returns
    None (with a logged skip) if the judge refuses twice."""
    if inquiry_a == inquiry_b:
        raise ValueError("inquiries must differ")
    prompt = prompts.JUDGE_BETTER_INQUIRY.format(
        query=case.actual_query,
        documents=prompts.render_documents(case.actual_documents),
        inquiry_a=inquiry_a, inquiry_b=inquiry_b)
    for attempt in range(2):
        obj = gateway.ask_structured(judge, prompt, JUDGE_PARAMS, ["better"])
        pick = str(obj["better"]).strip().upper()
        if pick in {"A", "B"}:
            chosen, rejected = ((inquiry_a, inquiry_b) if pick == "A"
                                else (inquiry_b, inquiry_a))
            return PreferencePair(case_id=case.id,
                                  prompt=render_pair_prompt(case),
                                  chosen=chosen, rejected=rejected,
                                  provenance=Provenance.ONLINE_JUDGE)
        prompt += "\nAnswer strictly with A or B."
    logger.warning("judge refused to pick an inquiry twice for case %s; "
                   "pair dropped", case.id)
    return None


try:  # service extras; the core pipeline works without them
    from pydantic import BaseModel
except ImportError:  # pragma: no cover
    BaseModel = object


class LabelBody(BaseModel):
    case_id: str
    inquiry: str


class PairBody(BaseModel):
    case_id: str
    inquiry_a: str
    inquiry_b: str


def build_environment_app(ctx: LabelingContext, case_store: dict[str, Case]):
    """FastAPI app exposing the labeling environment.

    Endpoints: POST /v1/label, GET /v1/cases?split=, GET /v1/case/{id},
    POST /v1/pair (judge-paired baseline), GET /healthz.
    """
    from fastapi import FastAPI, HTTPException

    app = FastAPI(title="confuse interaction environment")

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.get("/v1/cases")
    def list_cases(split: str | None = None):
        ids = []
        for case in case_store.values():
            if split and case.split.value != split.lower():
                continue
            ids.append(case.id)
        return ids

    @app.get("/v1/case/{case_id}")
    def get_case(case_id: str):
        case = case_store.get(case_id)
        if case is None:
            raise HTTPException(status_code=404, detail=f"unknown case {case_id!r}")
        return {"case_id": case.id, "prompt": render_pair_prompt(case),
                "dataset": case.dataset.value,
                "label": case.label.value if case.label else None,
                "split": case.split.value}

    @app.post("/v1/label")
    def label(body: LabelBody):
        case = case_store.get(body.case_id)
        if case is None:
            raise HTTPException(status_code=404,
                                detail=f"unknown case {body.case_id!r}")
        try:
            result = label_candidate(ctx, case, body.inquiry)
        except (UnsupportedCaseError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"verdict": result.verdict.value,
                "resolved_answer": result.resolved_answer,
                "score": result.score}

    @app.post("/v1/pair")
    def pair(body: PairBody):
        case = case_store.get(body.case_id)
        if case is None:
            raise HTTPException(status_code=404,
                                detail=f"unknown case {body.case_id!r}")
        try:
            result = pair_online(ctx.gateway, case, body.inquiry_a,
                                 body.inquiry_b, ctx.judge)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        if result is None:
            raise HTTPException(status_code=422, detail="judge refused twice")
        return result.to_dict()

    return app


def serve_environment(ctx: LabelingContext, case_store: dict[str, Case],
                      host: str = "127.0.0.1", port: int = 8765):
    """Run the environment service (blocking)."""
    import uvicorn

    app = build_environment_app(ctx, case_store)
    uvicorn.run(app, host=host, port=port, log_level="warning")

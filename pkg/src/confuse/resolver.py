"""Route a judged case to its remedy and produce the final answer.

Document uncertainty goes to retrieval, ambiguity to the simulated user,
capability to chain-of-thought. The protocol is single-round: a transcript
never holds more than one turn.
"""

from __future__ import annotations

from dataclasses import dataclass

from confuse import prompts
from confuse.gateway import Gateway, ModelRef, SamplingParams, ANSWER_PARAMS, JUDGE_PARAMS
from confuse.model import (Case, Channel, Dataset, InteractionTranscript,
                           Judgment, Turn, UncertaintySource, QA_DATASETS)
from confuse.retrieval import Corpus, search

#: Whitespace-token cap for the clarification channel.
USER_SIM_MAX_TOKENS = 50

#: Documents retrieved per resolution-time inquiry.
RETRIEVAL_K = 5


@dataclass(frozen=True)
class UserSimConfig:
    model: ModelRef
    max_tokens: int = USER_SIM_MAX_TOKENS


def answer_token_budget(dataset: Dataset) -> int:
    """50 tokens for the QA datasets, 500 for assistant/tool datasets."""
    return 50 if dataset in QA_DATASETS else 500


def truncate_tokens(text: str, limit: int) -> str:
    tokens = text.split()
    if len(tokens) <= limit:
        return text
    return " ".join(tokens[:limit])


def simulate_user(gateway: Gateway, intention: str, actual_query: str,
                  inquiry: str, cfg: UserSimConfig) -> str:
    """Answer an inquiry as the user would, from intent alone.

    The user knows the intention, not the answer; answer-seeking inquiries
    get the fixed beyond-scope sentence (enforced by the prompt). Output is
    truncated post-hoc since models ignore soft token limits.
    """
    if not (intention and actual_query and inquiry):
        raise ValueError("intention, actual_query and inquiry must be non-empty")
    prompt = prompts.USER_SIMULATOR.format(
        intention=intention, actual_query=actual_query, inquiry=inquiry)
    response = gateway.ask(cfg.model, prompt,
                           SamplingParams(temperature=0.0, max_tokens=128))
    return truncate_tokens(response, cfg.max_tokens)


def _render_history(turns: tuple[Turn, ...]) -> str:
    if not turns:
        return "(empty)"
    return "\n".join(f"Inquiry: {t.inquiry}\nResponse: {t.response}"
                     for t in turns)


def answer_query(gateway: Gateway, case: Case, transcript: InteractionTranscript,
                 model: ModelRef, cot: bool = False,
                 max_tokens: int | None = None) -> str:
    """Answer the presented query given its documents and the transcript."""
    budget = max_tokens if max_tokens is not None else answer_token_budget(case.dataset)
    template = prompts.ANSWER_QUERY_COT if cot else prompts.ANSWER_QUERY
    prompt = template.format(
        query=case.actual_query,
        documents=prompts.render_documents(case.actual_documents),
        inquiry_history=_render_history(transcript.turns),
        token_budget=budget,
    )
    params = SamplingParams(temperature=0.0,
                            max_tokens=max(budget * 4, 256))
    return gateway.ask(model, prompt, params)


def _fresh_inquiry(gateway: Gateway, case: Case, source: UncertaintySource,
                   model: ModelRef) -> str:
    template = (prompts.INQUIRY_FOR_RETRIEVAL
                if source is UncertaintySource.DOCUMENT
                else prompts.INQUIRY_FOR_CLARIFICATION)
    prompt = template.format(
        query=case.actual_query,
        documents=prompts.render_documents(case.actual_documents))
    return gateway.ask(model, prompt, JUDGE_PARAMS).strip()


def resolve(gateway: Gateway, case: Case, judgment: Judgment,
            model: ModelRef, user_sim: UserSimConfig,
            corpus: Corpus | None = None,
            k: int = RETRIEVAL_K) -> InteractionTranscript:
    """Run the remedy for the judged source and answer the query.

    The inquiry on record is reused when present; the Prompt strategy has
    none, so one is generated with the source-specific template. Empty
    retrieval results are not an error; answering proceeds with the
    original documents.
    """
    source = judgment.predicted

    if source is UncertaintySource.CAPABILITY:
        transcript = InteractionTranscript(case_id=case.id, turns=(),
                                           final_answer="")
        answer = answer_query(gateway, case, transcript, model, cot=True)
        return InteractionTranscript(case_id=case.id, turns=(),
                                     final_answer=answer)

    inquiry = judgment.inquiry or _fresh_inquiry(gateway, case, source, model)

    if source is UncertaintySource.DOCUMENT:
        if corpus is None:
            raise ValueError("document resolution requires a corpus")
        hits = search(corpus, inquiry, k=k) if len(corpus) else []
        response = prompts.render_documents([doc for doc, _ in hits]) if hits else "(no documents found)"
        turn = Turn(channel=Channel.RETRIEVAL, inquiry=inquiry, response=response)
    else:  # AMBIGUITY
        clarification = simulate_user(gateway, case.original_query,
                                      case.actual_query, inquiry, user_sim)
        turn = Turn(channel=Channel.USER, inquiry=inquiry, response=clarification)

    transcript = InteractionTranscript(case_id=case.id, turns=(turn,),
                                       final_answer="")
    answer = answer_query(gateway, case, transcript, model, cot=False)
    return InteractionTranscript(case_id=case.id, turns=(turn,),
                                 final_answer=answer)


def dual_answer(gateway: Gateway, case: Case, transcript: InteractionTranscript,
                eval_model: ModelRef, strong_model: ModelRef, judge: ModelRef,
                scorer=None) -> tuple[str, float]:
    """Generate answers with both models and keep the higher-scoring one.

    Ties go to the evaluated model. ``scorer`` defaults to
    evaluator.score_answer and is injectable for tests.
    """
    if scorer is None:
        from confuse.evaluator import score_answer
        scorer = lambda answer: score_answer(gateway, case, answer, judge)

    cot = not transcript.turns
    answers = [transcript.final_answer
               or answer_query(gateway, case, transcript, eval_model, cot=cot)]
    answers.append(answer_query(gateway, case, transcript, strong_model, cot=cot))
    scores = [scorer(a) for a in answers]
    if scores[0] >= scores[1]:
        return answers[0], scores[0]
    return answers[1], scores[1]

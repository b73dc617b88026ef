"""Decide the source of a case's uncertainty.

Three strategies: a direct A/B/C prompt, inquiry generation with voting,
and answer-uniqueness probing. The answer strategy samples the inquiry
twice and falls back to probing only when the two samples disagree; an
optional prompt-based capability short-circuit runs first (on by default,
chosen for its precision on the capability class).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from math import log

from confuse import prompts
from confuse.gateway import Gateway, ModelRef, SamplingParams, JUDGE_PARAMS
from confuse.model import Case, Judgment, Strategy, UncertaintySource
from confuse.retrieval import tokenize


class InvalidJudgmentError(Exception):
    pass


LETTER_TO_SOURCE = {
    "A": UncertaintySource.DOCUMENT,
    "B": UncertaintySource.AMBIGUITY,
    "C": UncertaintySource.CAPABILITY,
}
SOURCE_TO_LETTER = {v: k for k, v in LETTER_TO_SOURCE.items()}

#: Token-overlap threshold above which an inquiry counts as a query rephrase.
REPHRASE_OVERLAP = 0.9


@dataclass(frozen=True)
class InquiryProposal:
    inquiry: str
    choice: str  # "A" | "B" | "C"

    @property
    def source(self) -> UncertaintySource:
        return LETTER_TO_SOURCE[self.choice]


@dataclass(frozen=True)
class UniquenessVerdict:
    unique: bool
    probe_answers: tuple[str, ...]


@dataclass(frozen=True)
class EntropyEstimate:
    value: float  # nats
    cluster_sizes: tuple[int, ...]
    n_samples: int


@dataclass
class JudgeConfig:
    capability_by_prompt: bool = True
    n_probes: int = 2
    few_shot: bool = False

    def prefix(self) -> str:
        return prompts.FEW_SHOT_PREFIX if self.few_shot else ""


def _parse_letter(text: str, allowed: str = "ABC") -> str | None:
    token = text.strip().strip('"\'`.').strip().upper()
    return token if token in allowed else None


def judge_by_prompt(gateway: Gateway, case: Case, model: ModelRef,
                    params: SamplingParams = JUDGE_PARAMS,
                    config: JudgeConfig | None = None) -> UncertaintySource:
    """Single-token A/B/C judgment; re-asks once on an invalid token."""
    prompt = (config.prefix() if config else "") + prompts.JUDGE_SOURCE.format(
        query=case.actual_query,
        documents=prompts.render_documents(case.actual_documents),
    )
    messages = [{"role": "user", "content": prompt}]
    text = gateway.complete(model, messages, params)
    letter = _parse_letter(text)
    if letter is None:
        retry = messages + [
            {"role": "assistant", "content": text},
            {"role": "user", "content": 'Respond with a single token "A" or '
             '"B" or "C" only.'},
        ]
        text2 = gateway.complete(model, retry, params)
        letter = _parse_letter(text2)
        if letter is None:
            raise InvalidJudgmentError(
                f"two invalid judgment tokens: {text!r}, {text2!r}")
    return LETTER_TO_SOURCE[letter]


def token_overlap(a: str, b: str) -> float:
    """Jaccard overlap of token sets; 1.0 means the texts share all tokens."""
    ta, tb = set(tokenize(a)), set(tokenize(b))
    if not ta or not tb:
        return 0.0
    return len(ta & tb) / len(ta | tb)


def generate_inquiry(gateway: Gateway, case: Case, model: ModelRef,
                     params: SamplingParams = JUDGE_PARAMS,
                     config: JudgeConfig | None = None) -> InquiryProposal:
    """Generate a follow-up inquiry and the channel choice for it.

    A cheap syntactic rephrase guard forces choice C when the inquiry is
    essentially the query restated, before any model judgment is spent.
    """
    prompt = (config.prefix() if config else "") + prompts.GENERATE_INQUIRY.format(
        query=case.actual_query,
        documents=prompts.render_documents(case.actual_documents),
    )
    obj = gateway.ask_structured(model, prompt, params, ["Inquiry", "Choice"])
    inquiry = str(obj["Inquiry"]).strip()
    choice = _parse_letter(str(obj["Choice"])) or "C"
    if not inquiry:
        raise InvalidJudgmentError("empty inquiry in proposal")
    if token_overlap(inquiry, case.actual_query) >= REPHRASE_OVERLAP:
        choice = "C"
    return InquiryProposal(inquiry=inquiry, choice=choice)


def answer_inquiry(gateway: Gateway, case: Case, inquiry: str,
                   model: ModelRef, possible_answers: list[str],
                   params: SamplingParams = JUDGE_PARAMS) -> str:
    prompt = prompts.ANSWER_OF_INQUIRY.format(
        query=case.actual_query,
        documents=prompts.render_documents(case.actual_documents),
        inquiry=inquiry,
        possible_answers="; ".join(possible_answers) if possible_answers else "(empty)",
    )
    obj = gateway.ask_structured(model, prompt, params, ["Response"])
    return str(obj["Response"]).strip()


def _normalized(text: str) -> str:
    return " ".join(tokenize(text))


def semantically_equivalent(gateway: Gateway, judge: ModelRef, inquiry: str,
                            a: str, b: str,
                            params: SamplingParams = JUDGE_PARAMS) -> bool:
    """Judge-model equivalence, symmetrized by OR (the judge need not be)."""
    if _normalized(a) == _normalized(b):
        return True
    for x, y in ((a, b), (b, a)):
        obj = gateway.ask_structured(
            judge, prompts.JUDGE_EQUIVALENCE.format(inquiry=inquiry,
                                                    answer_a=x, answer_b=y),
            params, ["equivalent"])
        if str(obj["equivalent"]).strip().lower().startswith("y"):
            return True
    return False


def probe_answer_uniqueness(gateway: Gateway, case: Case, inquiry: str,
                            model: ModelRef, judge: ModelRef,
                            n_probes: int = 2,
                            params: SamplingParams = JUDGE_PARAMS) -> UniquenessVerdict:
    """Probe whether the inquiry admits more than one reasonable answer.

    A preset answer is obtained first, then the model is asked repeatedly
    for a new distinct answer given everything seen so far. Any probe that
    is semantically distinct from all prior answers means multiple answers
    fit. Byte-identical repeats short-circuit without the judge model.
    """
    if not inquiry:
        raise ValueError("inquiry must be non-empty")
    answers = [answer_inquiry(gateway, case, inquiry, model, [], params)]
    unique = True
    for _ in range(n_probes):
        probe = answer_inquiry(gateway, case, inquiry, model, list(answers), params)
        distinct = all(
            not semantically_equivalent(gateway, judge, inquiry, probe, prior,
                                        params)
            for prior in answers
        )
        answers.append(probe)
        if distinct:
            unique = False
            break
    return UniquenessVerdict(unique=unique, probe_answers=tuple(answers))


def check_rephrase(gateway: Gateway, case: Case, inquiry: str,
                   inquiry_answer: str, judge: ModelRef,
                   params: SamplingParams = JUDGE_PARAMS) -> bool:
    """True iff the inquiry answer coherently answers the original query,
    i.e. the inquiry merely restated the query (capability indicated)."""
    if not inquiry or not inquiry_answer:
        raise ValueError("inquiry and inquiry_answer must be non-empty")
    obj = gateway.ask_structured(
        judge, prompts.JUDGE_COHERENT_ANSWER.format(query=case.actual_query,
                                                    response=inquiry_answer),
        params, ["coherent"])
    return str(obj["coherent"]).strip().lower().startswith("y")


def majority_vote(samples: list[UncertaintySource]) -> UncertaintySource:
    """First two agreeing decide; otherwise the third."""
    if len(samples) != 3:
        raise ValueError(f"majority_vote needs exactly 3 samples, got {len(samples)}")
    return samples[0] if samples[0] == samples[1] else samples[2]


def judge_source(gateway: Gateway, case: Case, strategy: Strategy,
                 model: ModelRef, judge: ModelRef,
                 config: JudgeConfig | None = None,
                 params: SamplingParams = JUDGE_PARAMS) -> Judgment:
    """Run one strategy end to end and record the evidence used."""
    config = config or JudgeConfig()

    if strategy is Strategy.PROMPT:
        samples = [judge_by_prompt(gateway, case, model, params, config)
                   for _ in range(3)]
        return Judgment(case_id=case.id, strategy=strategy,
                        predicted=majority_vote(samples), samples=tuple(samples))

    if strategy is Strategy.INQUIRY:
        proposals = [generate_inquiry(gateway, case, model, params, config)
                     for _ in range(3)]
        samples = [p.source for p in proposals]
        predicted = majority_vote(samples)
        # keep the inquiry from the first sample that voted for the winner
        inquiry = next(p.inquiry for p in proposals if p.source == predicted)
        return Judgment(case_id=case.id, strategy=strategy, predicted=predicted,
                        samples=tuple(samples), inquiry=inquiry)

    # Strategy.ANSWER
    samples: list[UncertaintySource] = []
    if config.capability_by_prompt:
        prompt_verdict = judge_by_prompt(gateway, case, model, params, config)
        if prompt_verdict is UncertaintySource.CAPABILITY:
            first = generate_inquiry(gateway, case, model, params, config)
            return Judgment(case_id=case.id, strategy=strategy,
                            predicted=UncertaintySource.CAPABILITY,
                            samples=(prompt_verdict,), inquiry=first.inquiry)

    proposals = [generate_inquiry(gateway, case, model, params, config)
                 for _ in range(2)]
    samples = [p.source for p in proposals]
    inquiry = proposals[0].inquiry
    if samples[0] == samples[1]:
        return Judgment(case_id=case.id, strategy=strategy, predicted=samples[0],
                        samples=tuple(samples), inquiry=inquiry)

    preset = answer_inquiry(gateway, case, inquiry, model, [], params)
    if check_rephrase(gateway, case, inquiry, preset, judge, params):
        return Judgment(case_id=case.id, strategy=strategy,
                        predicted=UncertaintySource.CAPABILITY,
                        samples=tuple(samples), inquiry=inquiry,
                        inquiry_answers=(preset,))
    verdict = probe_answer_uniqueness(gateway, case, inquiry, model, judge,
                                      config.n_probes, params)
    predicted = (UncertaintySource.DOCUMENT if verdict.unique
                 else UncertaintySource.AMBIGUITY)
    return Judgment(case_id=case.id, strategy=strategy, predicted=predicted,
                    samples=tuple(samples), inquiry=inquiry,
                    inquiry_answers=verdict.probe_answers)


def cluster_entropy(cluster_sizes: list[int]) -> float:
    """Empirical entropy in nats of the cluster-size distribution."""
    n = sum(cluster_sizes)
    return -sum((k / n) * log(k / n) for k in cluster_sizes if k)


def estimate_answer_entropy(gateway: Gateway, case: Case, condition: str,
                            model: ModelRef, judge: ModelRef, n: int,
                            params: SamplingParams | None = None) -> EntropyEstimate:
    """Sample n answers under one conditioning and cluster them semantically.

    Conditions: "xd" (query + documents), "xc" (query + clarification),
    "xdc" (all three). Clustering is pairwise judge-model equivalence with
    transitive closure; entropy is over cluster sizes.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    condition = condition.lower()
    if condition not in {"xd", "xc", "xdc"}:
        raise ValueError(f"unknown condition: {condition}")
    if condition in {"xc", "xdc"} and not case.clarification:
        raise ValueError(f"condition {condition} requires a clarification")
    params = params or SamplingParams(temperature=0.7, max_tokens=256)

    documents = case.actual_documents if condition in {"xd", "xdc"} else ()
    history = (f"Inquiry: clarification\nResponse: {case.clarification}"
               if condition in {"xc", "xdc"} else "(empty)")
    prompt = prompts.ANSWER_QUERY.format(
        query=case.actual_query,
        documents=prompts.render_documents(documents),
        inquiry_history=history,
        token_budget=50,
    )
    answers = []
    for i in range(n):
        # distinct seeds per sample so replay caches don't collapse the draw
        p = params if params.seed is None else replace(params, seed=params.seed + i)
        answers.append(gateway.ask(model, prompt, p))

    # union-find over pairwise equivalence gives the transitive closure
    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if find(i) == find(j):
                continue
            if semantically_equivalent(gateway, judge, case.actual_query,
                                       answers[i], answers[j], JUDGE_PARAMS):
                parent[find(j)] = find(i)

    sizes: dict[int, int] = {}
    for i in range(n):
        root = find(i)
        sizes[root] = sizes.get(root, 0) + 1
    cluster_sizes = tuple(sorted(sizes.values(), reverse=True))
    return EntropyEstimate(value=cluster_entropy(list(cluster_sizes)),
                           cluster_sizes=cluster_sizes, n_samples=n)

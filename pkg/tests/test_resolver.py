import pytest

from confuse.gateway import ModelRef
from confuse.model import (Channel, Dataset, InteractionTranscript, Judgment,
                           Strategy, Turn, UncertaintySource)
from confuse.resolver import (RETRIEVAL_K, USER_SIM_MAX_TOKENS, UserSimConfig,
                              answer_query, answer_token_budget, dual_answer,
                              resolve, simulate_user, truncate_tokens)
from confuse.retrieval import ingest
from conftest import (ANSWER_COT_PAT, ANSWER_PAT, CLARIFY_INQ_PAT,
                      RETRIEVAL_INQ_PAT, USER_SIM_PAT, make_case, make_doc,
                      mutrux_case, rule_gateway, yoga_case)

MODEL = ModelRef(name="eval-model", endpoint="https://example.test/v1")
STRONG = ModelRef(name="strong-model", endpoint="https://example.test/v1")
JUDGE = ModelRef(name="judge-model", endpoint="https://example.test/v1")
USER = UserSimConfig(model=ModelRef(name="user-model",
                                    endpoint="https://example.test/v1"))


def judgment(source, inquiry=None):
    return Judgment(case_id="x", strategy=Strategy.ANSWER, predicted=source,
                    samples=(source,), inquiry=inquiry)


class TestBudgets:
    def test_dataset_budgets(self):
        assert answer_token_budget(Dataset.HOTPOTQA) == 50
        assert answer_token_budget(Dataset.AMBIGQA) == 50
        assert answer_token_budget(Dataset.TECHQA) == 500
        assert answer_token_budget(Dataset.TOOLBENCH) == 500

    def test_truncate_tokens(self):
        text = " ".join(str(i) for i in range(60))
        assert truncate_tokens(text, 50).split() == [str(i) for i in range(50)]
        assert truncate_tokens("short answer", 50) == "short answer"


class TestSimulateUser:
    def test_truncates_long_responses(self):
        long = " ".join(["word"] * 80)
        gateway, _ = rule_gateway([(USER_SIM_PAT, long)])
        out = simulate_user(gateway, "intent", "query", "inquiry?", USER)
        assert len(out.split()) == USER_SIM_MAX_TOKENS

    def test_prompt_carries_intention_not_answer(self):
        gateway, backend = rule_gateway([(USER_SIM_PAT, "the city is New York")])
        simulate_user(gateway, "locate the best yoga class in New York",
                      "locate the best yoga class in my city",
                      "Which city?", USER)
        prompt = backend.call_log[0]["prompt"]
        assert "locate the best yoga class in New York" in prompt
        assert backend.call_log[0]["model"] == "user-model"

    def test_empty_inquiry_rejected(self):
        gateway, _ = rule_gateway([])
        with pytest.raises(ValueError):
            simulate_user(gateway, "intent", "query", "", USER)


class TestAnswerQuery:
    def test_budget_rendered_into_prompt(self):
        gateway, backend = rule_gateway([(ANSWER_PAT, "yes")])
        case = mutrux_case()
        answer_query(gateway, case, InteractionTranscript(
            case_id=case.id, turns=(), final_answer=""), MODEL)
        assert "50" in backend.call_log[0]["prompt"]

    def test_cot_uses_reasoning_template(self):
        gateway, backend = rule_gateway([(ANSWER_COT_PAT, "Reasoning... yes")])
        case = mutrux_case()
        answer_query(gateway, case, InteractionTranscript(
            case_id=case.id, turns=(), final_answer=""), MODEL, cot=True)
        assert "reasoning steps" in backend.call_log[0]["prompt"]

    def test_history_rendered(self):
        gateway, backend = rule_gateway([(ANSWER_PAT, "yes")])
        case = yoga_case()
        turn = Turn(channel=Channel.USER, inquiry="Which city?",
                    response="New York")
        answer_query(gateway, case, InteractionTranscript(
            case_id=case.id, turns=(turn,), final_answer=""), MODEL)
        prompt = backend.call_log[0]["prompt"]
        assert "Inquiry: Which city?" in prompt
        assert "Response: New York" in prompt


class TestResolve:
    def test_capability_answers_with_cot_no_turns(self):
        gateway, backend = rule_gateway([(ANSWER_COT_PAT, "Reasoning. yes")])
        transcript = resolve(gateway, mutrux_case(),
                             judgment(UncertaintySource.CAPABILITY), MODEL,
                             USER)
        assert transcript.turns == ()
        assert transcript.final_answer == "Reasoning. yes"

    def test_document_retrieves_into_turn(self):
        corpus = ingest([
            make_doc("m2", "Floyd Mutrux is a screenwriter."),
            make_doc("x1", "Yoga in the park."),
        ])
        gateway, _ = rule_gateway([(ANSWER_PAT, "yes")])
        transcript = resolve(
            gateway, mutrux_case(),
            judgment(UncertaintySource.DOCUMENT,
                     inquiry="Is Floyd Mutrux a screenwriter?"),
            MODEL, USER, corpus=corpus)
        assert len(transcript.turns) == 1
        turn = transcript.turns[0]
        assert turn.channel is Channel.RETRIEVAL
        assert "Floyd Mutrux is a screenwriter." in turn.response
        assert transcript.final_answer == "yes"

    def test_document_without_corpus_rejected(self):
        gateway, _ = rule_gateway([])
        with pytest.raises(ValueError, match="corpus"):
            resolve(gateway, mutrux_case(),
                    judgment(UncertaintySource.DOCUMENT, inquiry="i"), MODEL,
                    USER)

    def test_document_no_hits_still_answers(self):
        corpus = ingest([make_doc("z", "completely unrelated text")])
        gateway, _ = rule_gateway([(ANSWER_PAT, "best effort")])
        transcript = resolve(gateway, mutrux_case(),
                             judgment(UncertaintySource.DOCUMENT,
                                      inquiry="qqq zzz"),
                             MODEL, USER, corpus=corpus)
        assert transcript.turns[0].response == "(no documents found)"
        assert transcript.final_answer == "best effort"

    def test_ambiguity_asks_user(self):
        gateway, _ = rule_gateway([
            (USER_SIM_PAT, "the city is New York"),
            (ANSWER_PAT, "the Central Park yoga class"),
        ])
        transcript = resolve(gateway, yoga_case(),
                             judgment(UncertaintySource.AMBIGUITY,
                                      inquiry="Which city are you in?"),
                             MODEL, USER)
        turn = transcript.turns[0]
        assert turn.channel is Channel.USER
        assert turn.response == "the city is New York"
        assert transcript.final_answer == "the Central Park yoga class"

    def test_missing_inquiry_generated_per_source(self):
        gateway, backend = rule_gateway([
            (CLARIFY_INQ_PAT, "Which city are you in?"),
            (USER_SIM_PAT, "New York"),
            (ANSWER_PAT, "done"),
        ])
        transcript = resolve(gateway, yoga_case(),
                             judgment(UncertaintySource.AMBIGUITY), MODEL,
                             USER)
        assert transcript.turns[0].inquiry == "Which city are you in?"

        corpus = ingest([make_doc("m2", "Floyd Mutrux facts")])
        gateway2, backend2 = rule_gateway([
            (RETRIEVAL_INQ_PAT, "Floyd Mutrux"),
            (ANSWER_PAT, "yes"),
        ])
        transcript2 = resolve(gateway2, mutrux_case(),
                              judgment(UncertaintySource.DOCUMENT), MODEL,
                              USER, corpus=corpus)
        assert transcript2.turns[0].inquiry == "Floyd Mutrux"


class TestDualAnswer:
    def transcript(self, answer=""):
        return InteractionTranscript(case_id="mutrux", turns=(),
                                     final_answer=answer)

    def test_tie_goes_to_evaluated_model(self):
        gateway, _ = rule_gateway([(ANSWER_COT_PAT, "strong answer")])
        answer, score = dual_answer(
            gateway, mutrux_case(), self.transcript("eval answer"), MODEL,
            STRONG, JUDGE, scorer=lambda a: 1.0)
        assert answer == "eval answer"
        assert score == 1.0

    def test_strong_wins_when_strictly_better(self):
        gateway, _ = rule_gateway([(ANSWER_COT_PAT, "strong answer")])
        answer, score = dual_answer(
            gateway, mutrux_case(), self.transcript("eval answer"), MODEL,
            STRONG, JUDGE,
            scorer=lambda a: 1.0 if a == "strong answer" else 0.0)
        assert answer == "strong answer"
        assert score == 1.0

    def test_reuses_transcript_answer_for_eval_model(self):
        gateway, backend = rule_gateway([(ANSWER_COT_PAT, "strong answer")])
        dual_answer(gateway, mutrux_case(), self.transcript("kept"), MODEL,
                    STRONG, JUDGE, scorer=lambda a: 0.5)
        models = [c["model"] for c in backend.call_log]
        assert models == ["strong-model"]

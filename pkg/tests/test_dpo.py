import json

import pytest
from fastapi.testclient import TestClient

from confuse.dpo import (LabelingContext, PreferencePair, Provenance,
                         UnsupportedCaseError, Verdict, build_environment_app,
                         collect_seed_pairs, label_candidate, pair_online,
                         render_pair_prompt, success_threshold)
from confuse.gateway import ModelRef
from confuse.model import (Dataset, Split, UncertaintySource, read_jsonl,
                           write_jsonl)
from confuse.retrieval import ingest
from conftest import (ANSWER_PAT, BETTER_PAT, CORRECT_PAT,
                      GENERATE_INQUIRY_PAT, USER_SIM_PAT, make_case, make_doc,
                      mutrux_case, rule_gateway, yoga_case)

ANSWER_MODEL = ModelRef(name="eval-model", endpoint="https://example.test/v1")
JUDGE = ModelRef(name="judge-model", endpoint="https://example.test/v1")
USER = ModelRef(name="user-model", endpoint="https://example.test/v1")
GEN_A = ModelRef(name="gen-a", endpoint="https://example.test/v1")
GEN_B = ModelRef(name="gen-b", endpoint="https://example.test/v1")


def context(gateway, corpus=None):
    return LabelingContext(gateway=gateway, answer_model=ANSWER_MODEL,
                           judge=JUDGE, user_sim=USER, corpus=corpus)


class TestPreferencePair:
    def test_round_trip(self, tmp_path):
        pair = PreferencePair(case_id="c", prompt="p", chosen="good inquiry",
                              rejected="bad inquiry",
                              provenance=Provenance.SEED)
        path = tmp_path / "pairs.jsonl"
        write_jsonl(path, [pair.to_dict()])
        assert PreferencePair.from_dict(read_jsonl(path)[0]) == pair

    def test_identical_sides_rejected(self):
        with pytest.raises(ValueError):
            PreferencePair(case_id="c", prompt="p", chosen="same",
                           rejected="same", provenance=Provenance.SEED)

    def test_thresholds(self):
        assert success_threshold(mutrux_case()) == 1.0
        assert success_threshold(make_case(dataset=Dataset.TECHQA)) == pytest.approx(2 / 3)


class TestLabelCandidate:
    def test_ambiguity_chosen(self):
        gateway, _ = rule_gateway([
            (USER_SIM_PAT, "the city is New York"),
            (ANSWER_PAT, "the Central Park yoga class"),
            (CORRECT_PAT, '{"correct": "yes"}'),
        ])
        result = label_candidate(context(gateway), yoga_case(),
                                 "Which city are you in?")
        assert result.verdict is Verdict.CHOSEN
        assert result.score == 1.0
        assert result.resolved_answer == "the Central Park yoga class"

    def test_document_rejected_when_answer_wrong(self):
        corpus = ingest([make_doc("m2", "Floyd Mutrux is a screenwriter.")])
        gateway, _ = rule_gateway([
            (ANSWER_PAT, "I cannot tell"),
            (CORRECT_PAT, '{"correct": "no"}'),
        ])
        result = label_candidate(context(gateway, corpus), mutrux_case(),
                                 "Is Floyd Mutrux a screenwriter?")
        assert result.verdict is Verdict.REJECTED

    def test_capability_case_unsupported(self):
        case = make_case(label=UncertaintySource.CAPABILITY)
        gateway, _ = rule_gateway([])
        with pytest.raises(UnsupportedCaseError):
            label_candidate(context(gateway), case, "inquiry")

    def test_unlabeled_case_unsupported(self):
        gateway, _ = rule_gateway([])
        with pytest.raises(UnsupportedCaseError):
            label_candidate(context(gateway), make_case(), "inquiry")

    def test_empty_inquiry_rejected(self):
        gateway, _ = rule_gateway([])
        with pytest.raises(ValueError):
            label_candidate(context(gateway), yoga_case(), "")


def proposal(inquiry):
    return json.dumps({"Inquiry": inquiry, "Choice": "B"})


class TestCollectSeedPairs:
    def test_success_failure_cross_product(self):
        gateway, _ = rule_gateway([
            (GENERATE_INQUIRY_PAT, [proposal("Which city are you in?"),
                                    proposal("What color is the sky?")]),
            (USER_SIM_PAT, "the city is New York"),
            (ANSWER_PAT, "an answer"),
            # baseline fails, generator A's resolution succeeds, B's fails
            (CORRECT_PAT, ['{"correct": "no"}', '{"correct": "yes"}',
                           '{"correct": "no"}']),
        ])
        pairs = collect_seed_pairs(context(gateway), [yoga_case()],
                                   [GEN_A, GEN_B])
        assert len(pairs) == 1
        pair = pairs[0]
        assert pair.chosen == "Which city are you in?"
        assert pair.rejected == "What color is the sky?"
        assert pair.provenance is Provenance.SEED
        assert pair.prompt == render_pair_prompt(yoga_case())

    def test_answerable_baseline_skipped(self):
        gateway, backend = rule_gateway([
            (ANSWER_PAT, "the Central Park yoga class"),
            (CORRECT_PAT, '{"correct": "yes"}'),
        ])
        pairs = collect_seed_pairs(context(gateway), [yoga_case()],
                                   [GEN_A, GEN_B])
        assert pairs == []
        # no inquiry was ever generated
        assert not any("json" in c["prompt"] for c in backend.call_log)

    def test_capability_cases_skipped(self):
        case = make_case(label=UncertaintySource.CAPABILITY)
        gateway, backend = rule_gateway([])
        assert collect_seed_pairs(context(gateway), [case], [GEN_A, GEN_B]) == []
        assert backend.call_log == []

    def test_needs_two_generators(self):
        gateway, _ = rule_gateway([])
        with pytest.raises(ValueError, match="2 generator"):
            collect_seed_pairs(context(gateway), [], [GEN_A])


class TestPairOnline:
    def test_judge_picks_b(self):
        gateway, _ = rule_gateway([(BETTER_PAT, '{"better": "B"}')])
        pair = pair_online(gateway, yoga_case(), "inquiry one", "inquiry two",
                           JUDGE)
        assert pair.chosen == "inquiry two"
        assert pair.rejected == "inquiry one"
        assert pair.provenance is Provenance.ONLINE_JUDGE

    def test_refusal_twice_returns_none(self, caplog):
        gateway, _ = rule_gateway([(BETTER_PAT, '{"better": "neither"}')])
        with caplog.at_level("WARNING"):
            pair = pair_online(gateway, yoga_case(), "a", "b", JUDGE)
        assert pair is None
        assert "pair dropped" in caplog.text

    def test_identical_inquiries_rejected(self):
        gateway, _ = rule_gateway([])
        with pytest.raises(ValueError):
            pair_online(gateway, yoga_case(), "same", "same", JUDGE)


class TestEnvironmentService:
    def client(self, rules=()):
        gateway, backend = rule_gateway(list(rules))
        cases = {
            "yoga": yoga_case(),
            "cap": make_case(case_id="cap",
                             label=UncertaintySource.CAPABILITY,
                             split=Split.TRAINING),
        }
        app = build_environment_app(context(gateway), cases)
        return TestClient(app), backend

    def test_healthz(self):
        client, _ = self.client()
        assert client.get("/healthz").json() == {"status": "ok"}

    def test_list_cases_split_filter(self):
        client, _ = self.client()
        assert set(client.get("/v1/cases").json()) == {"yoga", "cap"}
        assert client.get("/v1/cases", params={"split": "training"}).json() == ["cap"]

    def test_get_case(self):
        client, _ = self.client()
        body = client.get("/v1/case/yoga").json()
        assert body["label"] == "ambiguity"
        assert "locate the best yoga class in my city" in body["prompt"]
        assert client.get("/v1/case/nope").status_code == 404

    def test_label_endpoint(self):
        client, _ = self.client([
            (USER_SIM_PAT, "the city is New York"),
            (ANSWER_PAT, "the Central Park yoga class"),
            (CORRECT_PAT, '{"correct": "yes"}'),
        ])
        response = client.post("/v1/label", json={
            "case_id": "yoga", "inquiry": "Which city are you in?"})
        assert response.status_code == 200
        assert response.json()["verdict"] == "chosen"
        assert response.json()["score"] == 1.0

    def test_label_errors(self):
        client, _ = self.client()
        assert client.post("/v1/label", json={
            "case_id": "ghost", "inquiry": "i"}).status_code == 404
        assert client.post("/v1/label", json={
            "case_id": "cap", "inquiry": "i"}).status_code == 400

    def test_pair_endpoint(self):
        client, _ = self.client([(BETTER_PAT, '{"better": "A"}')])
        response = client.post("/v1/pair", json={
            "case_id": "yoga", "inquiry_a": "one", "inquiry_b": "two"})
        assert response.status_code == 200
        assert response.json()["chosen"] == "one"
        assert client.post("/v1/pair", json={
            "case_id": "yoga", "inquiry_a": "x", "inquiry_b": "x"}).status_code == 400

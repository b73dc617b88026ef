import json

import pytest

from confuse.model import (Case, CaseFileError, Dataset, Split,
                           UncertaintySource, read_cases, validate_case,
                           write_cases)
from conftest import make_case, make_doc, mutrux_case, yoga_case


class TestValidateCase:
    def test_document_case_with_missing_gold_is_valid(self):
        assert validate_case(mutrux_case()) == []

    def test_capability_requires_same_query(self):
        case = make_case(actual_query="something else",
                         label=UncertaintySource.CAPABILITY)
        violations = validate_case(case)
        assert any("actual_query = original_query" in v for v in violations)

    def test_ambiguity_requires_clarification(self):
        case = make_case(actual_query="obscured form of the query",
                         label=UncertaintySource.AMBIGUITY)
        violations = validate_case(case)
        assert violations == ["label=ambiguity requires clarification"]

    def test_document_requires_missing_gold(self):
        case = make_case(label=UncertaintySource.DOCUMENT)
        assert any("gold document missing" in v for v in validate_case(case))

    def test_pure(self):
        case = make_case(actual_query="x", label=UncertaintySource.CAPABILITY)
        assert validate_case(case) == validate_case(case)


class TestCaseIO:
    def test_round_trip(self, tmp_path):
        cases = [yoga_case(), mutrux_case(), make_case(case_id="c3")]
        path = tmp_path / "cases.jsonl"
        write_cases(path, cases)
        assert read_cases(path) == cases

    def test_bad_record_names_line(self, tmp_path):
        path = tmp_path / "cases.jsonl"
        good = json.dumps(yoga_case().to_dict())
        path.write_text(good + "\nnot json\n")
        with pytest.raises(CaseFileError, match="line 2"):
            read_cases(path)

    def test_duplicate_id_named(self, tmp_path):
        path = tmp_path / "cases.jsonl"
        record = json.dumps(yoga_case().to_dict())
        path.write_text(record + "\n" + record + "\n")
        with pytest.raises(CaseFileError, match="yoga"):
            read_cases(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "cases.jsonl"
        path.write_text("")
        assert read_cases(path) == []

    def test_unknown_label_rejected(self, tmp_path):
        record = yoga_case().to_dict()
        record["label"] = "telepathy"
        path = tmp_path / "cases.jsonl"
        path.write_text(json.dumps(record) + "\n")
        with pytest.raises(CaseFileError, match="line 1"):
            read_cases(path)

    def test_unknown_dataset_maps_to_custom(self):
        record = yoga_case().to_dict()
        record["dataset"] = "my-new-corpus"
        assert Case.from_dict(record).dataset is Dataset.CUSTOM


def test_source_total_order():
    assert (UncertaintySource.DOCUMENT < UncertaintySource.AMBIGUITY
            < UncertaintySource.CAPABILITY)
    assert sorted([UncertaintySource.CAPABILITY, UncertaintySource.DOCUMENT,
                   UncertaintySource.AMBIGUITY]) == [
        UncertaintySource.DOCUMENT, UncertaintySource.AMBIGUITY,
        UncertaintySource.CAPABILITY]

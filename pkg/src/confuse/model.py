"""Canonical data types, validation and JSONL persistence.

Every other module exchanges these records. All types are immutable value
records and safe to share across concurrent workers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from enum import Enum
from pathlib import Path
from typing import Iterable


class UncertaintySource(Enum):
    """Why a case cannot be answered as presented.

    The order DOCUMENT < AMBIGUITY < CAPABILITY is fixed so serialization
    and sorting are deterministic.
    """

    DOCUMENT = "document"
    AMBIGUITY = "ambiguity"
    CAPABILITY = "capability"

    def __lt__(self, other: "UncertaintySource") -> bool:
        order = [UncertaintySource.DOCUMENT, UncertaintySource.AMBIGUITY,
                 UncertaintySource.CAPABILITY]
        return order.index(self) < order.index(other)


class Dataset(Enum):
    HOTPOTQA = "hotpotqa"
    AMBIGQA = "ambigqa"
    TECHQA = "techqa"
    EXPERTQA = "expertqa"
    TOOLBENCH = "toolbench"
    CUSTOM = "custom"

    @classmethod
    def parse(cls, name: str) -> "Dataset":
        """Map a dataset name to a variant; unknown names become CUSTOM."""
        try:
            return cls(name.strip().lower())
        except ValueError:
            return cls.CUSTOM


#: Datasets scored as binary QA correctness; everything else is graded 1-4.
QA_DATASETS = frozenset({Dataset.HOTPOTQA, Dataset.AMBIGQA})


class Split(Enum):
    BENCHMARK = "benchmark"
    TRAINING = "training"


class Strategy(Enum):
    PROMPT = "prompt"
    INQUIRY = "inquiry"
    ANSWER = "answer"


class Channel(Enum):
    RETRIEVAL = "retrieval"
    USER = "user"
    NONE = "none"


@dataclass(frozen=True)
class Document:
    doc_id: str
    title: str
    body: str
    is_gold: bool = False

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Document":
        return cls(doc_id=str(d["doc_id"]), title=d.get("title", ""),
                   body=d["body"], is_gold=bool(d.get("is_gold", False)))


@dataclass(frozen=True)
class Case:
    """One benchmark item: the query as authored and as presented, the
    document sets, the clarification and gold answer, and its label."""

    id: str
    dataset: Dataset
    original_query: str
    actual_query: str
    gold_documents: tuple[Document, ...]
    actual_documents: tuple[Document, ...]
    gold_answer: str
    clarification: str | None = None
    gold_inquiry: str | None = None
    label: UncertaintySource | None = None
    split: Split = Split.BENCHMARK

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "dataset": self.dataset.value,
            "original_query": self.original_query,
            "actual_query": self.actual_query,
            "gold_documents": [d.to_dict() for d in self.gold_documents],
            "actual_documents": [d.to_dict() for d in self.actual_documents],
            "clarification": self.clarification,
            "gold_answer": self.gold_answer,
            "gold_inquiry": self.gold_inquiry,
            "label": self.label.value if self.label else None,
            "split": self.split.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Case":
        label = d.get("label")
        if label is not None:
            label = UncertaintySource(label)  # unknown labels raise here
        return cls(
            id=str(d["id"]),
            dataset=Dataset.parse(d["dataset"]),
            original_query=d["original_query"],
            actual_query=d["actual_query"],
            gold_documents=tuple(Document.from_dict(x) for x in d["gold_documents"]),
            actual_documents=tuple(Document.from_dict(x) for x in d["actual_documents"]),
            clarification=d.get("clarification"),
            gold_answer=d["gold_answer"],
            gold_inquiry=d.get("gold_inquiry"),
            label=label,
            split=Split(d.get("split", "benchmark")),
        )


@dataclass(frozen=True)
class Judgment:
    """A predicted uncertainty source plus the strategy, raw samples and
    inquiry that produced it."""

    case_id: str
    strategy: Strategy
    predicted: UncertaintySource
    samples: tuple[UncertaintySource, ...]
    inquiry: str | None = None
    inquiry_answers: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "strategy": self.strategy.value,
            "predicted": self.predicted.value,
            "samples": [s.value for s in self.samples],
            "inquiry": self.inquiry,
            "inquiry_answers": list(self.inquiry_answers),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Judgment":
        return cls(
            case_id=str(d["case_id"]),
            strategy=Strategy(d["strategy"]),
            predicted=UncertaintySource(d["predicted"]),
            samples=tuple(UncertaintySource(s) for s in d["samples"]),
            inquiry=d.get("inquiry"),
            inquiry_answers=tuple(d.get("inquiry_answers", [])),
        )


@dataclass(frozen=True)
class Turn:
    channel: Channel
    inquiry: str
    response: str


@dataclass(frozen=True)
class InteractionTranscript:
    """Ordered inquiry/response turns plus the final answer.

    The protocol is single-round: at most one turn. A NONE channel means
    the pure chain-of-thought path and carries no inquiry.
    """

    case_id: str
    turns: tuple[Turn, ...]
    final_answer: str

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "turns": [{"channel": t.channel.value, "inquiry": t.inquiry,
                       "response": t.response} for t in self.turns],
            "final_answer": self.final_answer,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "InteractionTranscript":
        return cls(
            case_id=str(d["case_id"]),
            turns=tuple(Turn(Channel(t["channel"]), t["inquiry"], t["response"])
                        for t in d["turns"]),
            final_answer=d["final_answer"],
        )


def validate_case(case: Case) -> list[str]:
    """Return a description of every violated Case invariant (empty if ok).

    Validation never raises; it is pure in the input.
    """
    violations: list[str] = []
    if not case.id:
        violations.append("id must be non-empty")
    for doc in case.gold_documents + case.actual_documents:
        if not doc.body:
            violations.append(f"document {doc.doc_id!r}: body must be non-empty")
    gold_ids = {d.doc_id for d in case.gold_documents}
    actual_ids = {d.doc_id for d in case.actual_documents}
    if case.label is UncertaintySource.AMBIGUITY:
        if not case.clarification:
            violations.append("label=ambiguity requires clarification")
        if case.original_query == case.actual_query:
            violations.append(
                "label=ambiguity requires actual_query != original_query")
    elif case.label is UncertaintySource.DOCUMENT:
        if gold_ids <= actual_ids:
            violations.append(
                "label=document requires at least one gold document missing "
                "from actual_documents")
    elif case.label is UncertaintySource.CAPABILITY:
        if actual_ids != gold_ids:
            violations.append(
                "label=capability requires actual_documents = gold_documents")
        if case.actual_query != case.original_query:
            violations.append(
                "label=capability requires actual_query = original_query")
    return violations


class CaseFileError(ValueError):
    """Malformed case file; carries the 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


def read_cases(path: str | Path) -> list[Case]:
    """Read a JSONL case file, preserving file order.

    Raises CaseFileError on malformed records (with the line number) and on
    duplicate ids (naming the id).
    """
    cases: list[Case] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                case = Case.from_dict(record)
            except (ValueError, KeyError, TypeError) as exc:
                raise CaseFileError(f"malformed case record: {exc}", lineno) from exc
            if case.id in seen:
                raise CaseFileError(f"duplicate case id {case.id!r}", lineno)
            seen.add(case.id)
            cases.append(case)
    return cases


def write_cases(path: str | Path, cases: Iterable[Case]) -> None:
    """Write cases as UTF-8 JSONL, one record per line (single writer)."""
    with open(path, "w", encoding="utf-8") as fh:
        for case in cases:
            fh.write(json.dumps(case.to_dict(), ensure_ascii=False) + "\n")


def read_jsonl(path: str | Path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise CaseFileError(f"malformed record: {exc}", lineno) from exc
    return records


def write_jsonl(path: str | Path, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")

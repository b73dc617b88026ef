"""Preference-pair file I/O.

The JSONL schema is shared with the pair-factory emitter: one object per
line with exactly the fields case_id, prompt, chosen, rejected,
provenance. Parsing is strict so schema drift fails loudly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

PAIR_FIELDS = ("case_id", "prompt", "chosen", "rejected", "provenance")


class PairFileError(ValueError):
    def __init__(self, path, line: int, message: str):
        self.line = line
        super().__init__(f"{path}, line {line}: {message}")


@dataclass
class Pair:
    """Mutable: interactive training replaces chosen/rejected in place."""

    case_id: str
    prompt: str
    chosen: str
    rejected: str
    provenance: str

    def to_dict(self) -> dict:
        return {field: getattr(self, field) for field in PAIR_FIELDS}

    @classmethod
    def from_dict(cls, record: dict) -> "Pair":
        missing = [f for f in PAIR_FIELDS if f not in record]
        if missing:
            raise ValueError(f"pair record missing fields: {missing}")
        extra = [k for k in record if k not in PAIR_FIELDS]
        if extra:
            raise ValueError(f"pair record has unknown fields: {extra}")
        return cls(**{f: str(record[f]) for f in PAIR_FIELDS})


def read_pairs(path: str | Path) -> list[Pair]:
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                pairs.append(Pair.from_dict(json.loads(line)))
            except (json.JSONDecodeError, ValueError) as exc:
                raise PairFileError(path, lineno, str(exc))
    return pairs


def write_pairs(path: str | Path, pairs: list[Pair]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for pair in pairs:
            fh.write(json.dumps(pair.to_dict(), ensure_ascii=False) + "\n")

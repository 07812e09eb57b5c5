"""Dataset records and their JSONL serialization."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ContractError

SCENARIOS = ("extractive", "abstractive", "multiple-choice", "boolean")


@dataclass(frozen=True)
class DatasetRecord:
    """One evaluable query with its reference answers.

    `context` carries the source passage for extractive scenarios; `choices`
    lists the options for multiple-choice ones.
    """

    id: str
    query: str
    references: tuple[str, ...]
    scenario: str = "abstractive"
    choices: tuple[str, ...] = field(default=())
    context: str | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ContractError("record id must be nonempty")
        if not self.query or not self.query.strip():
            raise ContractError(f"record {self.id!r} has an empty query")
        if not self.references:
            raise ContractError(f"record {self.id!r} needs at least one reference")
        if self.scenario not in SCENARIOS:
            raise ContractError(
                f"record {self.id!r} has unknown scenario {self.scenario!r}; "
                f"expected one of {SCENARIOS}"
            )
        if self.scenario == "multiple-choice" and not self.choices:
            raise ContractError(f"record {self.id!r} is multiple-choice but has no choices")
        object.__setattr__(self, "references", tuple(self.references))
        object.__setattr__(self, "choices", tuple(self.choices))

    def as_dict(self) -> dict:
        out: dict = {
            "id": self.id,
            "query": self.query,
            "references": list(self.references),
            "scenario": self.scenario,
        }
        if self.choices:
            out["choices"] = list(self.choices)
        if self.context is not None:
            out["context"] = self.context
        return out

    @classmethod
    def from_dict(cls, payload: dict) -> "DatasetRecord":
        try:
            return cls(
                id=str(payload["id"]),
                query=payload["query"],
                references=tuple(payload["references"]),
                scenario=payload.get("scenario", "abstractive"),
                choices=tuple(payload.get("choices", ())),
                context=payload.get("context"),
            )
        except KeyError as exc:
            raise ContractError(f"dataset record is missing field {exc}")


def load_dataset(path: str | Path) -> list[DatasetRecord]:
    """Read a JSONL dataset, enforcing unique record ids."""
    records = []
    seen = set()
    with open(path) as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                payload = json.loads(line)
            except json.JSONDecodeError:
                raise ContractError(f"corrupt dataset line {lineno} in {path}")
            record = DatasetRecord.from_dict(payload)
            if record.id in seen:
                raise ContractError(f"duplicate record id {record.id!r} at line {lineno}")
            seen.add(record.id)
            records.append(record)
    if not records:
        raise ContractError(f"dataset {path} is empty")
    return records


def save_dataset(records: Iterable[DatasetRecord], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as handle:
        for record in records:
            handle.write(json.dumps(record.as_dict(), sort_keys=True) + "\n")


def sample_order(
    n_records: int, n_rounds: int, rng
) -> list[int]:
    """Per-seed query order: a uniform shuffle, extended by bootstrap draws
    with replacement only when the pool is smaller than the horizon."""
    if n_records < 1:
        raise ContractError("dataset must be nonempty")
    if n_rounds < 1:
        raise ContractError("n_rounds must be >= 1")
    order = [int(i) for i in rng.permutation(n_records)]
    if n_rounds <= n_records:
        return order[:n_rounds]
    extra = rng.integers(0, n_records, size=n_rounds - n_records)
    return order + [int(i) for i in extra]

"""Readers for the FewRel-shaped dataset file and the relation-info file.

These mirror the consumer-side format rules (first mention, consecutive token
indices, half-open spans) so a store produced here always lines up with what
the training side loads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path


@dataclass(frozen=True)
class InstanceRecord:
    key: str  # "relation_id/index"
    tokens: tuple[str, ...]
    head_span: tuple[int, int]
    tail_span: tuple[int, int]


@dataclass(frozen=True)
class RelationRecord:
    relation_id: str
    name: str
    description: str


def _load_json_object(path) -> dict:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: top level must be an object")
    return doc


def _span(mention, n_tokens: int, what: str) -> tuple[int, int]:
    if not isinstance(mention, (list, tuple)) or len(mention) != 3 or not mention[2]:
        raise ValueError(f"{what}: entity entry must be [surface, kb_id, [[indices...]]]")
    indices = [int(i) for i in mention[2][0]]
    if not indices:
        raise ValueError(f"{what}: empty token-index list")
    for a, b in zip(indices, indices[1:]):
        if b != a + 1:
            raise ValueError(f"{what}: non-consecutive token indices {indices}")
    start, end = indices[0], indices[-1] + 1
    if not (0 <= start < end <= n_tokens):
        raise ValueError(f"{what}: span [{start},{end}) out of range for {n_tokens} tokens")
    return start, end


def read_dataset(path) -> list[InstanceRecord]:
    """All instances in file order, keyed 'relation_id/index'."""
    records = []
    for rid, insts in _load_json_object(path).items():
        if not isinstance(insts, list) or not insts:
            raise ValueError(f"relation {rid!r}: instance list must be non-empty")
        for i, raw in enumerate(insts):
            key = f"{rid}/{i}"
            tokens = raw.get("tokens")
            if not tokens or not all(isinstance(t, str) for t in tokens):
                raise ValueError(f"{key}: tokens must be a non-empty list of strings")
            records.append(
                InstanceRecord(
                    key=key,
                    tokens=tuple(tokens),
                    head_span=_span(raw.get("h"), len(tokens), f"{key} head"),
                    tail_span=_span(raw.get("t"), len(tokens), f"{key} tail"),
                )
            )
    return records


def read_relation_info(path) -> list[RelationRecord]:
    records = []
    for rid, entry in _load_json_object(path).items():
        if not isinstance(entry, list) or len(entry) not in (1, 2) or not entry[0]:
            raise ValueError(f"relation {rid!r}: entry must be [name] or [name, description]")
        records.append(
            RelationRecord(
                relation_id=rid,
                name=entry[0],
                description=entry[1] if len(entry) == 2 else "",
            )
        )
    return records

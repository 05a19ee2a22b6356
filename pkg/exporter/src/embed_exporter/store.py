"""Embedding-store writer: line-delimited JSON, bit-compatible with the
training side's reader (header {"dim": d, ...extra metadata...}, then one
record per key)."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np


class StoreWriter:
    def __init__(self, dim: int, metadata: dict | None = None):
        self.dim = dim
        self.header = {"dim": dim, **(metadata or {})}
        self._lines = [json.dumps(self.header)]
        self._seen: set[str] = set()

    def _vec(self, v, what: str) -> list[float]:
        arr = np.asarray(v, dtype=np.float64)
        if arr.shape != (self.dim,):
            raise ValueError(f"{what}: vector shape {arr.shape} != ({self.dim},)")
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"{what}: non-finite components")
        return arr.tolist()

    def add_instance(self, key: str, head, tail) -> None:
        if key in self._seen:
            raise ValueError(f"duplicate store key {key!r}")
        self._seen.add(key)
        self._lines.append(json.dumps(
            {"key": key, "head": self._vec(head, key), "tail": self._vec(tail, key)}
        ))

    def add_relation(self, relation_id: str, cls_view, mean_view) -> None:
        if relation_id in self._seen:
            raise ValueError(f"duplicate store key {relation_id!r}")
        self._seen.add(relation_id)
        self._lines.append(json.dumps(
            {"relation": relation_id,
             "cls": self._vec(cls_view, relation_id),
             "mean": self._vec(mean_view, relation_id)}
        ))

    def write(self, path) -> None:
        Path(path).write_text("\n".join(self._lines) + "\n", encoding="utf-8")

"""File ingestion: dataset and relation-info parsing, splits, embedding store.

Dataset files follow the public FewRel 1.0 shape: one JSON document mapping
relation id -> list of instances, each instance carrying "tokens" plus "h"/"t"
entries of the form [surface, kb_id, [[token indices...], ...]]. Only the first
mention's first index list is used; index lists must be consecutive and are
converted to half-open ranges.

The embedding store is UTF-8 line-delimited JSON: a header line {"dim": d}
(extra header keys are ignored) followed by one record per key, either
{"key": "rel/idx", "head": [...], "tail": [...]} or
{"relation": "rel", "cls": [...], "mean": [...]}. Floats are serialized with
the shortest round-trip decimal representation.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .types import InstanceEmbedding, RelationEmbedding, RelationInfo, TokenizedInstance

log = logging.getLogger(__name__)


class FormatError(ValueError):
    """A file could not be parsed as the expected document shape."""


def instance_key(relation_id: str, index: int) -> str:
    return f"{relation_id}/{index}"


@dataclass
class Dataset:
    """Relation id -> ordered instances; instance_index equals list position."""

    relations: dict[str, list[TokenizedInstance]]

    def __post_init__(self):
        for rid, insts in self.relations.items():
            for pos, inst in enumerate(insts):
                if inst.relation_id != rid or inst.instance_index != pos:
                    raise ValueError(
                        f"instance under {rid!r} claims {inst.relation_id}/{inst.instance_index}"
                        f" but sits at position {pos}"
                    )

    @property
    def relation_ids(self) -> list[str]:
        return list(self.relations)

    @property
    def n_relations(self) -> int:
        return len(self.relations)

    @property
    def n_instances(self) -> int:
        return sum(len(v) for v in self.relations.values())

    def instance(self, relation_id: str, index: int) -> TokenizedInstance:
        return self.relations[relation_id][index]


@dataclass(frozen=True)
class SplitSpec:
    """Disjoint relation-id sets for training and evaluation."""

    train_relations: frozenset[str]
    eval_relations: frozenset[str]

    def __post_init__(self):
        object.__setattr__(self, "train_relations", frozenset(self.train_relations))
        object.__setattr__(self, "eval_relations", frozenset(self.eval_relations))
        overlap = self.train_relations & self.eval_relations
        if overlap:
            raise ValueError(f"train/eval relation sets overlap: {sorted(overlap)}")


def _no_duplicate_keys(pairs):
    seen = {}
    for key, value in pairs:
        if key in seen:
            raise FormatError(f"duplicate key {key!r} in document")
        seen[key] = value
    return seen


def _load_json(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FileNotFoundError(f"cannot read {path}: {exc}") from exc
    try:
        doc = json.loads(text, object_pairs_hook=_no_duplicate_keys)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise FormatError(f"{path}: top level must be an object")
    return doc


def _mention_to_span(mention, n_tokens: int, what: str) -> tuple[int, int]:
    """First mention's first index list -> half-open range; must be consecutive."""
    if (
        not isinstance(mention, (list, tuple))
        or len(mention) != 3
        or not isinstance(mention[2], (list, tuple))
        or len(mention[2]) == 0
    ):
        raise FormatError(f"{what}: entity entry must be [surface, kb_id, [[indices...]]]")
    spans = mention[2]
    indices = spans[0]
    if not isinstance(indices, (list, tuple)) or len(indices) == 0:
        raise FormatError(f"{what}: empty token-index list")
    idx = [int(i) for i in indices]
    for a, b in zip(idx, idx[1:]):
        if b != a + 1:
            raise ValueError(f"{what}: non-consecutive token indices {idx}")
    start, end = idx[0], idx[-1] + 1
    if not (0 <= start < end <= n_tokens):
        raise ValueError(f"{what}: span [{start},{end}) out of range for {n_tokens} tokens")
    if len(spans) > 1:
        log.info("%s: %d mentions listed, using the first", what, len(spans))
    return start, end


def _parse_instance(raw, relation_id: str, index: int) -> TokenizedInstance:
    what = instance_key(relation_id, index)
    if not isinstance(raw, dict) or not {"tokens", "h", "t"} <= raw.keys():
        raise FormatError(f"{what}: instance must carry tokens/h/t")
    tokens = raw["tokens"]
    if not isinstance(tokens, list) or not tokens or not all(isinstance(t, str) for t in tokens):
        raise ValueError(f"{what}: tokens must be a non-empty list of strings")
    head = _mention_to_span(raw["h"], len(tokens), f"{what} head")
    tail = _mention_to_span(raw["t"], len(tokens), f"{what} tail")
    if max(head[0], tail[0]) < min(head[1], tail[1]):
        log.warning("%s: head span %s overlaps tail span %s", what, head, tail)
    return TokenizedInstance(
        tokens=tuple(tokens),
        head_span=head,
        tail_span=tail,
        relation_id=relation_id,
        instance_index=index,
    )


def load_dataset(path) -> Dataset:
    """Parse a FewRel-shaped dataset file, validating every span."""
    doc = _load_json(path)
    relations: dict[str, list[TokenizedInstance]] = {}
    for rid, raw_insts in doc.items():
        if not isinstance(raw_insts, list) or not raw_insts:
            raise ValueError(f"relation {rid!r}: instance list must be non-empty")
        relations[rid] = [_parse_instance(raw, rid, i) for i, raw in enumerate(raw_insts)]
    if not relations:
        raise ValueError(f"{path}: no relations in dataset")
    return Dataset(relations)


def dataset_to_doc(ds: Dataset) -> dict:
    """FewRel-shaped document for a dataset (surfaces rebuilt from spans)."""
    doc = {}
    for rid, insts in ds.relations.items():
        doc[rid] = [
            {
                "tokens": list(inst.tokens),
                "h": [
                    " ".join(inst.tokens[inst.head_span[0] : inst.head_span[1]]),
                    "",
                    [list(range(inst.head_span[0], inst.head_span[1]))],
                ],
                "t": [
                    " ".join(inst.tokens[inst.tail_span[0] : inst.tail_span[1]]),
                    "",
                    [list(range(inst.tail_span[0], inst.tail_span[1]))],
                ],
            }
            for inst in insts
        ]
    return doc


def save_dataset(ds: Dataset, path) -> None:
    Path(path).write_text(json.dumps(dataset_to_doc(ds)), encoding="utf-8")


@dataclass
class AuditReport:
    """Lenient validation summary used by the check command."""

    n_relations: int = 0
    n_instances: int = 0
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def audit_dataset(path) -> AuditReport:
    """Validate a dataset file instance by instance, collecting violations
    instead of raising on the first bad span."""
    doc = _load_json(path)
    report = AuditReport(n_relations=len(doc))
    for rid, raw_insts in doc.items():
        if not isinstance(raw_insts, list) or not raw_insts:
            report.violations.append(f"{rid}: instance list must be non-empty")
            continue
        for i, raw in enumerate(raw_insts):
            report.n_instances += 1
            try:
                _parse_instance(raw, rid, i)
            except (ValueError, FormatError) as exc:
                report.violations.append(str(exc))
    return report


def load_relation_info(path) -> dict[str, RelationInfo]:
    """Parse a relation-info file: {"P17": ["country", "description..."], ...}."""
    doc = _load_json(path)
    infos = {}
    for rid, entry in doc.items():
        if not isinstance(entry, list) or len(entry) not in (1, 2):
            raise FormatError(f"relation {rid!r}: entry must be [name] or [name, description]")
        name = entry[0]
        description = entry[1] if len(entry) == 2 else ""
        if not isinstance(name, str) or not isinstance(description, str):
            raise FormatError(f"relation {rid!r}: name and description must be strings")
        infos[rid] = RelationInfo(relation_id=rid, name=name, description=description)
    return infos


def split_dataset(ds: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Partition a dataset by relation id according to the split spec."""
    missing = (spec.train_relations | spec.eval_relations) - set(ds.relations)
    if missing:
        raise ValueError(f"split names unknown relations: {sorted(missing)}")
    train = {r: insts for r, insts in ds.relations.items() if r in spec.train_relations}
    evalr = {r: insts for r, insts in ds.relations.items() if r in spec.eval_relations}
    return Dataset(train), Dataset(evalr)


@dataclass
class EmbeddingStore:
    """In-memory mirror of an embedding store file."""

    dim: int
    instances: dict[str, InstanceEmbedding] = field(default_factory=dict)
    relations: dict[str, RelationEmbedding] = field(default_factory=dict)

    def add_instance(self, key: str, emb: InstanceEmbedding) -> None:
        if key in self.instances:
            raise ValueError(f"duplicate instance key {key!r}")
        if emb.dim != self.dim:
            raise ValueError(f"instance {key!r} has dim {emb.dim}, store dim {self.dim}")
        self.instances[key] = emb

    def add_relation(self, relation_id: str, emb: RelationEmbedding) -> None:
        if relation_id in self.relations:
            raise ValueError(f"duplicate relation key {relation_id!r}")
        if emb.dim != self.dim:
            raise ValueError(
                f"relation {relation_id!r} has dim {emb.dim}, store dim {self.dim}"
            )
        self.relations[relation_id] = emb


def write_embedding_store(store: EmbeddingStore, path) -> None:
    lines = [json.dumps({"dim": store.dim})]
    for key, emb in store.instances.items():
        lines.append(
            json.dumps({"key": key, "head": emb.head_vec.tolist(), "tail": emb.tail_vec.tolist()})
        )
    for rid, emb in store.relations.items():
        lines.append(
            json.dumps(
                {"relation": rid, "cls": emb.cls_view.tolist(), "mean": emb.mean_view.tolist()}
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _vector_field(record: dict, name: str, dim: int, where: str) -> list[float]:
    value = record.get(name)
    if not isinstance(value, list):
        raise FormatError(f"{where}: missing vector field {name!r}")
    if len(value) != dim:
        raise ValueError(f"{where}: {name} has {len(value)} components, header dim is {dim}")
    return value


def read_embedding_store(path) -> EmbeddingStore:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FileNotFoundError(f"cannot read {path}: {exc}") from exc
    lines = text.splitlines()
    if not lines:
        raise FormatError(f"{path}: empty store (missing header)")

    def parse_line(i: int) -> dict:
        try:
            record = json.loads(lines[i])
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}:{i + 1}: truncated or malformed record: {exc}") from exc
        if not isinstance(record, dict):
            raise FormatError(f"{path}:{i + 1}: record must be an object")
        return record

    header = parse_line(0)
    if "dim" not in header or not isinstance(header["dim"], int) or header["dim"] < 1:
        raise FormatError(f"{path}: header must carry a positive integer 'dim'")
    store = EmbeddingStore(dim=header["dim"])
    for i in range(1, len(lines)):
        if not lines[i].strip():
            continue
        record = parse_line(i)
        where = f"{path}:{i + 1}"
        if "key" in record:
            head = _vector_field(record, "head", store.dim, where)
            tail = _vector_field(record, "tail", store.dim, where)
            store.add_instance(record["key"], InstanceEmbedding(head_vec=head, tail_vec=tail))
        elif "relation" in record:
            cls = _vector_field(record, "cls", store.dim, where)
            mean = _vector_field(record, "mean", store.dim, where)
            store.add_relation(record["relation"], RelationEmbedding(cls_view=cls, mean_view=mean))
        else:
            raise FormatError(f"{where}: record is neither an instance nor a relation")
    return store

"""Entity-marker feature extraction from a pretrained contextual encoder.

Instances get start/end markers inserted around both entity mentions; the
hidden state at each start marker becomes the entity vector. Relations encode
name + description; the position-0 summary embedding is the cls view and the
mean over text tokens (padding and [CLS]/[SEP] excluded) is the mean view.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import torch
from transformers import AutoModel, AutoTokenizer

from .data import InstanceRecord, RelationRecord

log = logging.getLogger(__name__)

HEAD_START, HEAD_END = "[E1]", "[/E1]"
TAIL_START, TAIL_END = "[E2]", "[/E2]"
MARKERS = (HEAD_START, HEAD_END, TAIL_START, TAIL_END)

RELATION_MEAN_POLICY = "text tokens only; [CLS]/[SEP]/padding excluded"


@dataclass
class ExportConfig:
    model: str = "bert-base-uncased"
    max_length: int = 128
    batch_size: int = 16
    device: str = "cpu"

    def __post_init__(self):
        if self.max_length < 8:
            raise ValueError("max_length must be >= 8")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class ExportOutcome:
    dim: int
    instance_keys: list[str] = field(default_factory=list)
    relation_ids: list[str] = field(default_factory=list)
    skipped: list[tuple[str, str]] = field(default_factory=list)  # (key, reason)


def marked_words(inst: InstanceRecord) -> list[str]:
    """Token list with entity markers inserted; end markers are emitted before
    start markers at a shared boundary so adjacent/overlapping spans nest."""
    out = []
    for i in range(len(inst.tokens) + 1):
        if i == inst.head_span[1]:
            out.append(HEAD_END)
        if i == inst.tail_span[1]:
            out.append(TAIL_END)
        if i == inst.head_span[0]:
            out.append(HEAD_START)
        if i == inst.tail_span[0]:
            out.append(TAIL_START)
        if i < len(inst.tokens):
            out.append(inst.tokens[i])
    return out


class MarkedEncoder:
    """Pretrained encoder plus the marker bookkeeping around it."""

    def __init__(self, model_name_or_path: str, device: str = "cpu"):
        self.tokenizer = AutoTokenizer.from_pretrained(model_name_or_path)
        self.model = AutoModel.from_pretrained(model_name_or_path)
        self.model.eval()
        self.device = torch.device(device)
        self.model.to(self.device)
        self._ensure_markers()
        self.head_id = self.tokenizer.convert_tokens_to_ids(HEAD_START)
        self.tail_id = self.tokenizer.convert_tokens_to_ids(TAIL_START)

    @property
    def hidden_size(self) -> int:
        return int(self.model.config.hidden_size)

    def _ensure_markers(self) -> None:
        old_rows = self.model.get_input_embeddings().weight.shape[0]
        self.tokenizer.add_special_tokens({"additional_special_tokens": list(MARKERS)})
        needed = len(self.tokenizer)
        if needed > old_rows:
            # new marker rows get the vocabulary-mean embedding: deterministic
            # across runs, unlike the library's random resize init
            mean_row = self.model.get_input_embeddings().weight.data.mean(dim=0)
            self.model.resize_token_embeddings(needed)
            self.model.get_input_embeddings().weight.data[old_rows:] = mean_row
            log.info("added %d marker tokens with mean-embedding rows", needed - old_rows)

    def _forward(self, encoded):
        encoded = {k: v.to(self.device) for k, v in encoded.items()}
        with torch.no_grad():
            hidden = self.model(**encoded).last_hidden_state
        return hidden.cpu().numpy().astype(np.float64)

    def encode_instances(
        self, batch: list[InstanceRecord], max_length: int
    ) -> list[tuple[str, np.ndarray | None, np.ndarray | None, str | None]]:
        """Per instance: (key, head_vec, tail_vec, skip_reason)."""
        words = [marked_words(inst) for inst in batch]
        encoded = self.tokenizer(
            words, is_split_into_words=True, truncation=True,
            max_length=max_length, padding=True, return_tensors="pt",
        )
        hidden = self._forward(encoded)
        out = []
        for row, inst in enumerate(batch):
            ids = encoded["input_ids"][row]
            head_pos = (ids == self.head_id).nonzero()
            tail_pos = (ids == self.tail_id).nonzero()
            if len(head_pos) == 0 or len(tail_pos) == 0:
                out.append((inst.key, None, None,
                            f"entity marker beyond max length {max_length}"))
                continue
            head_vec = hidden[row, int(head_pos[0, 0])]
            tail_vec = hidden[row, int(tail_pos[0, 0])]
            out.append((inst.key, head_vec, tail_vec, None))
        return out

    def encode_relations(
        self, batch: list[RelationRecord], max_length: int
    ) -> list[tuple[str, np.ndarray, np.ndarray]]:
        """Per relation: (relation_id, cls_view, mean_view)."""
        texts = [
            rel.name if not rel.description else f"{rel.name} {rel.description}"
            for rel in batch
        ]
        encoded = self.tokenizer(
            texts, truncation=True, max_length=max_length, padding=True,
            return_tensors="pt",
        )
        hidden = self._forward(encoded)
        excluded = {
            self.tokenizer.cls_token_id,
            self.tokenizer.sep_token_id,
            self.tokenizer.pad_token_id,
        }
        out = []
        for row, rel in enumerate(batch):
            ids = encoded["input_ids"][row].tolist()
            attn = encoded["attention_mask"][row].tolist()
            text_positions = [
                i for i, (tid, a) in enumerate(zip(ids, attn))
                if a == 1 and tid not in excluded
            ]
            if not text_positions:
                raise ValueError(f"relation {rel.relation_id!r}: no text tokens to pool")
            cls_view = hidden[row, 0]
            mean_view = hidden[row, text_positions].mean(axis=0)
            out.append((rel.relation_id, cls_view, mean_view))
        return out


def _batched(items, size):
    for i in range(0, len(items), size):
        yield items[i : i + size]


def export_store(
    cfg: ExportConfig,
    instances: list[InstanceRecord],
    relations: list[RelationRecord],
    out_path,
    encoder: MarkedEncoder | None = None,
) -> ExportOutcome:
    """Encode everything and write one store file, single writer, dataset order."""
    from .store import StoreWriter

    enc = encoder or MarkedEncoder(cfg.model, cfg.device)
    outcome = ExportOutcome(dim=enc.hidden_size)
    writer = StoreWriter(enc.hidden_size, metadata={"relation_mean": RELATION_MEAN_POLICY})
    for batch in _batched(instances, cfg.batch_size):
        for key, head, tail, reason in enc.encode_instances(batch, cfg.max_length):
            if reason is not None:
                outcome.skipped.append((key, reason))
                log.warning("skipped %s: %s", key, reason)
                continue
            writer.add_instance(key, head, tail)
            outcome.instance_keys.append(key)
    for batch in _batched(relations, cfg.batch_size):
        for rid, cls_view, mean_view in enc.encode_relations(batch, cfg.max_length):
            writer.add_relation(rid, cls_view, mean_view)
            outcome.relation_ids.append(rid)
    writer.write(out_path)
    return outcome

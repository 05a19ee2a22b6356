"""Fixtures: a tiny local BERT checkpoint (hidden size 768) plus a 10-instance
dataset slice, so the export path runs hermetically on CPU."""

import json

import pytest
import torch
from transformers import BertConfig, BertModel

VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "the", "capital", "of", "france", "is", "paris", "berlin", "germany",
    "einstein", "was", "born", "in", "ulm", "curie", "warsaw", "poland",
    "a", "physicist", "chemist", "painter", "rome", "italy", "madrid", "spain",
    "country", "sovereign", "state", "this", "item", "occupation", "person",
    "profession", "place", "birth", "location", "city", "where", "lives",
]

SENTENCES = {
    "P17": [
        (["paris", "is", "the", "capital", "of", "france"], [0], [5]),
        (["berlin", "is", "the", "capital", "of", "germany"], [0], [5]),
        (["rome", "is", "the", "capital", "of", "italy"], [0], [5]),
        (["rome", "is", "the", "capital", "of", "italy"], [0], [5]),  # duplicate on purpose
    ],
    "P106": [
        (["einstein", "was", "a", "physicist"], [0], [3]),
        (["curie", "was", "a", "chemist"], [0], [3]),
        (["curie", "was", "a", "physicist"], [0], [3]),
    ],
    "P19": [
        (["einstein", "was", "born", "in", "ulm"], [0], [4]),
        (["curie", "was", "born", "in", "warsaw"], [0], [4]),
        (["curie", "was", "born", "in", "poland"], [0], [4]),
    ],
}

RELINFO = {
    "P17": ["country", "sovereign state of this item"],
    "P106": ["occupation"],
    "P19": ["place of birth", "where the person was born"],
}


@pytest.fixture(scope="session")
def model_dir(tmp_path_factory):
    path = tmp_path_factory.mktemp("tinybert")
    (path / "vocab.txt").write_text("\n".join(VOCAB) + "\n", encoding="utf-8")
    (path / "tokenizer_config.json").write_text(
        json.dumps({"tokenizer_class": "BertTokenizer", "do_lower_case": True}),
        encoding="utf-8",
    )
    torch.manual_seed(0)
    cfg = BertConfig(vocab_size=len(VOCAB), hidden_size=768, num_hidden_layers=2,
                     num_attention_heads=4, intermediate_size=256,
                     max_position_embeddings=192)
    BertModel(cfg).save_pretrained(path)
    return path


def instance_doc(tokens, head_idx, tail_idx):
    return {"tokens": tokens,
            "h": [" ".join(tokens[i] for i in head_idx), "Q1", [head_idx]],
            "t": [" ".join(tokens[i] for i in tail_idx), "Q2", [tail_idx]]}


@pytest.fixture(scope="session")
def slice_files(tmp_path_factory):
    path = tmp_path_factory.mktemp("slice")
    doc = {rid: [instance_doc(t, h, ta) for t, h, ta in insts]
           for rid, insts in SENTENCES.items()}
    data = path / "data.json"
    data.write_text(json.dumps(doc), encoding="utf-8")
    relinfo = path / "relinfo.json"
    relinfo.write_text(json.dumps(RELINFO), encoding="utf-8")
    return data, relinfo

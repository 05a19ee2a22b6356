"""CLI: export entity/relation embeddings into an embedding-store file."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .data import read_dataset, read_relation_info
from .export import ExportConfig, export_store


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="embed-export")
    sub = parser.add_subparsers(dest="command", required=True)
    exp = sub.add_parser("export", help="encode a dataset into an embedding store")
    exp.add_argument("--model", default="bert-base-uncased",
                     help="model name or local path")
    exp.add_argument("--data", required=True, help="dataset file (FewRel shape)")
    exp.add_argument("--relinfo", required=True, help="relation info file")
    exp.add_argument("--out", required=True, help="embedding store output path")
    exp.add_argument("--max-len", type=int, default=128)
    exp.add_argument("--batch", type=int, default=16)
    exp.add_argument("--device", default="cpu")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)
    args = build_parser().parse_args(argv)
    try:
        cfg = ExportConfig(model=args.model, max_length=args.max_len,
                           batch_size=args.batch, device=args.device)
        instances = read_dataset(args.data)
        relations = read_relation_info(args.relinfo)
        outcome = export_store(cfg, instances, relations, args.out)
    except (FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"dim: {outcome.dim}")
    print(f"instances exported: {len(outcome.instance_keys)}")
    print(f"relations exported: {len(outcome.relation_ids)}")
    print(f"skipped: {len(outcome.skipped)}")
    for key, reason in outcome.skipped:
        print(f"  {key}: {reason}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: check, train, eval, ablate, sweep.

Configs are flat JSON key-value files; command-line flags override file
values. Every run echoes its fully resolved config (defaults included) to
stdout first; that echo is itself a valid config file and re-running it
reproduces the run. Exit codes: 0 success, 1 domain/validation failure,
2 usage/parse failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, fields
from pathlib import Path

from .experiments import (
    ModelState,
    TrainConfig,
    ablation_run,
    evaluate,
    init_state,
    load_checkpoint,
    lr_sweep,
    render_ablation,
    render_report,
    render_sweep,
    save_checkpoint,
    setting_label,
    train,
)
from .ingest import (
    FormatError,
    SplitSpec,
    audit_dataset,
    load_dataset,
    load_relation_info,
    read_embedding_store,
    split_dataset,
)

log = logging.getLogger(__name__)

TRAIN_KEYS = {f.name for f in fields(TrainConfig)}
EXTRA_KEYS = ("data", "relinfo", "store", "checkpoint", "out",
              "train_relations", "eval_relations", "threads", "rates")


def _load_config_file(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FileNotFoundError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise FormatError(f"{path}: config must be a flat JSON object")
    unknown = set(doc) - TRAIN_KEYS - set(EXTRA_KEYS)
    if unknown:
        raise FormatError(f"{path}: unknown config keys {sorted(unknown)}")
    return doc


def _resolve(args) -> dict:
    """Merge config file, flag overrides, and defaults into one flat dict."""
    raw = _load_config_file(args.config) if getattr(args, "config", None) else {}
    for key in ("data", "relinfo", "store", "checkpoint", "out", "seed", "threads"):
        value = getattr(args, key, None)
        if value is not None:
            raw[key] = value
    if getattr(args, "rates", None):
        raw["rates"] = [float(r) for r in args.rates.split(",") if r.strip()]
    cfg = TrainConfig(**{k: v for k, v in raw.items() if k in TRAIN_KEYS and v is not None})
    resolved = asdict(cfg)
    for key in EXTRA_KEYS:
        resolved[key] = raw.get(key)
    if resolved["threads"] is None:
        resolved["threads"] = os.cpu_count() or 1
    return resolved


def _echo(resolved: dict) -> None:
    print(json.dumps(resolved, indent=2))


def _config_of(resolved: dict) -> TrainConfig:
    return TrainConfig(**{k: resolved[k] for k in TRAIN_KEYS})


def _require(resolved: dict, key: str, why: str):
    if not resolved.get(key):
        raise ValueError(f"this subcommand needs {key!r} ({why})")
    return resolved[key]


def _load_inputs(resolved: dict):
    ds = load_dataset(_require(resolved, "data", "dataset file"))
    rel_info = load_relation_info(_require(resolved, "relinfo", "relation info file"))
    missing = set(ds.relations) - set(rel_info)
    if missing:
        raise ValueError(f"relations without info entries: {sorted(missing)[:5]} ...")
    store = None
    if resolved.get("store"):
        store = read_embedding_store(resolved["store"])
    return ds, rel_info, store


def _split(resolved: dict, ds):
    train_ids = resolved.get("train_relations")
    eval_ids = resolved.get("eval_relations")
    if not train_ids and not eval_ids:
        log.warning("no split given; training and evaluating on the full dataset")
        return ds, ds
    spec = SplitSpec(
        train_relations=frozenset(train_ids or []),
        eval_relations=frozenset(eval_ids or []),
    )
    train_ds, eval_ds = split_dataset(ds, spec)
    if not train_ids:
        train_ds = ds
    if not eval_ids:
        eval_ds = ds
    return train_ds, eval_ds


def cmd_check(args) -> int:
    report = audit_dataset(args.data)
    print(f"relations: {report.n_relations}")
    print(f"instances: {report.n_instances}")
    if args.relinfo:
        infos = load_relation_info(args.relinfo)
        print(f"relation info entries: {len(infos)}")
    print(f"span violations: {len(report.violations)}")
    for v in report.violations:
        print(f"  {v}")
    return 0 if report.ok else 1


def cmd_train(args) -> int:
    resolved = _resolve(args)
    _echo(resolved)
    cfg = _config_of(resolved)
    ds, rel_info, store = _load_inputs(resolved)
    train_ds, _ = _split(resolved, ds)
    state = init_state(cfg)
    history = train(cfg, train_ds, rel_info, state, store=store)
    ckpt = _require(resolved, "checkpoint", "where to write trained parameters")
    save_checkpoint(state, cfg, ckpt)
    if history:
        print(f"trained {len(history)} iterations; loss {history[0]:.4f} -> {history[-1]:.4f}")
    else:
        print("trained 0 iterations")
    print(f"checkpoint written to {ckpt}")
    return 0


def _evaluate_resolved(resolved: dict, state: ModelState, cfg: TrainConfig):
    ds, rel_info, store = _load_inputs(resolved)
    _, eval_ds = _split(resolved, ds)
    return evaluate(
        state, eval_ds, rel_info, cfg.n_way, cfg.k_shot, cfg.q_queries,
        cfg.eval_iters, cfg.seed, store=store, cfg=cfg,
        threads=resolved["threads"],
    )


def cmd_eval(args) -> int:
    resolved = _resolve(args)
    _echo(resolved)
    state, ckpt_cfg = load_checkpoint(_require(resolved, "checkpoint", "trained parameters"))
    cfg = _config_of(resolved)
    if ckpt_cfg.dim != cfg.dim or ckpt_cfg.encoder != cfg.encoder or ckpt_cfg.fusion != cfg.fusion:
        raise ValueError(
            f"checkpoint was trained as encoder={ckpt_cfg.encoder} dim={ckpt_cfg.dim} "
            f"fusion={ckpt_cfg.fusion}; config asks for {cfg.encoder}/{cfg.dim}/{cfg.fusion}"
        )
    result = _evaluate_resolved(resolved, state, cfg)
    setting = setting_label(cfg.n_way, cfg.k_shot)
    print(f"{setting} accuracy: {100 * result.accuracy:.2f}% +- {100 * result.stderr:.2f}%")
    _emit_report(
        resolved,
        render_report({"this run": {setting: 100 * result.accuracy}}, include_reference=True),
    )
    return 0


def cmd_ablate(args) -> int:
    resolved = _resolve(args)
    _echo(resolved)
    cfg = _config_of(resolved)
    ds, rel_info, store = _load_inputs(resolved)
    train_ds, eval_ds = _split(resolved, ds)
    rows = ablation_run(cfg, train_ds, eval_ds, rel_info, store=store,
                        threads=resolved["threads"])
    report = render_ablation(rows, setting_label(cfg.n_way, cfg.k_shot))
    print(report, end="")
    _emit_report(resolved, report, echo=False)
    return 0


def cmd_sweep(args) -> int:
    resolved = _resolve(args)
    _echo(resolved)
    cfg = _config_of(resolved)
    rates = resolved.get("rates")
    if not rates:
        raise ValueError("sweep needs --rates or a 'rates' config entry")
    ds, rel_info, store = _load_inputs(resolved)
    train_ds, eval_ds = _split(resolved, ds)
    rows = lr_sweep(cfg, rates, train_ds, eval_ds, rel_info, store=store,
                    threads=resolved["threads"])
    report = render_sweep(rows, setting_label(cfg.n_way, cfg.k_shot))
    print(report, end="")
    _emit_report(resolved, report, echo=False)
    return 0


def _emit_report(resolved: dict, report: str, echo: bool = True) -> None:
    out = resolved.get("out")
    if out:
        Path(out).write_text(report, encoding="utf-8")
        print(f"report written to {out}")
    elif echo:
        print(report, end="")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relproto",
        description="Few-shot relation classification with prototype + relation fusion",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    check = sub.add_parser("check", help="validate a dataset file")
    check.add_argument("--data", required=True)
    check.add_argument("--relinfo")
    check.set_defaults(handler=cmd_check)

    def run_flags(p, rates=False):
        p.add_argument("--config", help="flat JSON config file")
        p.add_argument("--data")
        p.add_argument("--relinfo")
        p.add_argument("--store")
        p.add_argument("--checkpoint")
        p.add_argument("--out")
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int)
        if rates:
            p.add_argument("--rates", help="comma-separated learning rates")

    ptrain = sub.add_parser("train", help="train and write a checkpoint")
    run_flags(ptrain)
    ptrain.set_defaults(handler=cmd_train)

    peval = sub.add_parser("eval", help="evaluate a checkpoint")
    run_flags(peval)
    peval.set_defaults(handler=cmd_eval)

    pablate = sub.add_parser("ablate", help="run every fusion strategy")
    run_flags(pablate)
    pablate.set_defaults(handler=cmd_ablate)

    psweep = sub.add_parser("sweep", help="learning-rate sweep")
    run_flags(psweep, rates=True)
    psweep.set_defaults(handler=cmd_sweep)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except (FileNotFoundError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

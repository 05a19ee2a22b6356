"""Training loop, evaluation protocol, ablation runner, lr sweep, reports.

A (config, seed) pair fixes every sampled episode, every gradient, the final
parameters, and the reported accuracy. Ablation and sweep runs share seeds so
all variants consume identical episode streams.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .encoder import PrecomputedEncoder, ToyEncoder, ToyEncoderGrads, ToyEncoderParams
from .ingest import Dataset, EmbeddingStore, FormatError
from .optim import make_optimizer
from .protonet import ce_loss, episode_loss_and_grads, episode_scores, predict, softmax
from .sampler import derive_rng, make_rng, materialize_episode, sample_episode_spec, trace_episode
from .types import FUSION_IDS, FusionStrategy, RelationInfo, fusion_id, init_fusion

log = logging.getLogger(__name__)

TOY_DEFAULT_DIM = 32
PRECOMPUTED_DEFAULT_DIM = 768

# Validation accuracies reported on the FewRel 1.0 leaderboard for the plain
# prototype baseline and the prototype + relation-addition model on BERT.
REFERENCE_VALIDATION = {
    "Proto-BERT": {"5-w-1-s": 84.77, "5-w-5-s": 89.54, "10-w-1-s": 76.85, "10-w-5-s": 83.42},
    "Ours (BERT)": {"5-w-1-s": 91.29, "5-w-5-s": 94.05, "10-w-1-s": 86.09, "10-w-5-s": 89.68},
}


@dataclass
class TrainConfig:
    n_way: int = 5
    k_shot: int = 1
    q_queries: int = 1
    batch_episodes: int = 4
    train_iters: int = 2000
    eval_iters: int = 500
    learning_rate: float = 1e-3
    seed: int = 0
    fusion: str = "direct_add"
    encoder: str = "toy"  # "toy" | "precomputed"
    dim: int | None = None  # default 32 for toy, 768 for precomputed
    toy_buckets: int = 4096
    optimizer: str = "adam"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    relation_grads: bool = True  # backprop through the relation fusion path

    def __post_init__(self):
        if self.dim is None:
            self.dim = TOY_DEFAULT_DIM if self.encoder == "toy" else PRECOMPUTED_DEFAULT_DIM
        for name in ("n_way", "k_shot", "q_queries", "batch_episodes", "eval_iters", "dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.train_iters < 0:
            raise ValueError("train_iters must be >= 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.fusion not in FUSION_IDS:
            raise ValueError(f"fusion must be one of {FUSION_IDS}")
        if self.encoder not in ("toy", "precomputed"):
            raise ValueError("encoder must be 'toy' or 'precomputed'")


@dataclass
class RunResult:
    accuracy: float
    stderr: float
    loss_curve: list[float]
    config: dict
    wall_time: float

    def __post_init__(self):
        if not (0.0 <= self.accuracy <= 1.0):
            raise ValueError(f"accuracy {self.accuracy} outside [0, 1]")
        if self.stderr < 0:
            raise ValueError("stderr must be >= 0")


@dataclass
class ModelState:
    """Everything training updates: encoder parameters (toy only) and fusion."""

    fusion: FusionStrategy
    encoder_params: ToyEncoderParams | None = None

    def parameters(self) -> dict[str, np.ndarray]:
        params = {}
        if self.encoder_params is not None:
            params["encoder.E"] = self.encoder_params.E
            params["encoder.W_c"] = self.encoder_params.W_c
            params["encoder.b_c"] = self.encoder_params.b_c
        params.update(self.fusion.parameters())
        return params


def init_state(cfg: TrainConfig) -> ModelState:
    from .encoder import init_toy_params

    fusion = init_fusion(cfg.fusion, cfg.dim, cfg.seed)
    if cfg.encoder == "toy":
        return ModelState(fusion=fusion, encoder_params=init_toy_params(cfg.seed, cfg.toy_buckets, cfg.dim))
    return ModelState(fusion=fusion)


def make_provider(cfg: TrainConfig, state: ModelState, store: EmbeddingStore | None = None):
    if cfg.encoder == "toy":
        return ToyEncoder(state.encoder_params)
    if store is None:
        raise ValueError("precomputed encoder needs an embedding store")
    return PrecomputedEncoder(store, expected_dim=cfg.dim)


def train(
    cfg: TrainConfig,
    ds: Dataset,
    rel_info: dict[str, RelationInfo],
    state: ModelState,
    store: EmbeddingStore | None = None,
    spec_log: list | None = None,
) -> list[float]:
    """Run the episodic training loop, updating state in place.

    Per iteration: sample batch_episodes episodes, average the loss and the
    gradients over the batch (fixed reduction order), take one optimizer step.
    Returns the per-iteration mean loss history.
    """
    provider = make_provider(cfg, state, store)
    params = state.parameters()
    if not params:
        log.warning("nothing to train: provider is frozen and fusion %s has no parameters",
                    fusion_id(state.fusion))
        return []
    opt = make_optimizer(cfg.optimizer, cfg.learning_rate,
                         cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    rng = make_rng(cfg.seed)
    history = []
    for _ in range(cfg.train_iters):
        batch_grads = {name: np.zeros_like(p) for name, p in params.items()}
        enc_grads = (
            ToyEncoderGrads(batch_grads["encoder.E"], batch_grads["encoder.W_c"],
                            batch_grads["encoder.b_c"])
            if cfg.encoder == "toy"
            else None
        )
        batch_loss = 0.0
        for _b in range(cfg.batch_episodes):
            spec = sample_episode_spec(rng, ds, cfg.n_way, cfg.k_shot, cfg.q_queries)
            if spec_log is not None:
                spec_log.append(spec)
            if cfg.encoder == "toy":
                ep, tape = trace_episode(spec, ds, provider, rel_info)
            else:
                ep, tape = materialize_episode(spec, ds, provider, rel_info), None
            loss, grads = episode_loss_and_grads(ep, state.fusion)
            batch_loss += loss
            if tape is not None:
                provider.backward(tape, grads, enc_grads, relation_grads=cfg.relation_grads)
            if grads.fusion_W is not None:
                batch_grads["fusion.W"] += grads.fusion_W
                batch_grads["fusion.b"] += grads.fusion_b
        for g in batch_grads.values():
            g /= cfg.batch_episodes
        opt.step(params, batch_grads)
        history.append(batch_loss / cfg.batch_episodes)
    return history


def _eval_episode(args) -> tuple[int, int, float]:
    i, seed, ds, rel_info, provider, fusion, n_way, k_shot, q_queries = args
    rng = derive_rng(seed, i)
    spec = sample_episode_spec(rng, ds, n_way, k_shot, q_queries)
    ep = materialize_episode(spec, ds, provider, rel_info)
    scores, labels = episode_scores(ep, fusion)
    correct = sum(int(predict(s) == y) for s, y in zip(scores, labels))
    loss = float(np.mean([ce_loss(softmax(s), int(y)) for s, y in zip(scores, labels)]))
    return correct, len(labels), loss


def evaluate(
    state: ModelState,
    ds: Dataset,
    rel_info: dict[str, RelationInfo],
    n_way: int,
    k_shot: int,
    q_queries: int,
    iters: int,
    seed: int,
    store: EmbeddingStore | None = None,
    cfg: TrainConfig | None = None,
    threads: int = 1,
    spec_log: list | None = None,
) -> RunResult:
    """Accuracy over `iters` freshly sampled episodes (episode i draws from the
    derived seed `seed XOR i`, so episodes are order-independent and may be
    evaluated in parallel)."""
    started = time.perf_counter()
    if state.encoder_params is not None:
        provider = ToyEncoder(state.encoder_params)
    else:
        if store is None:
            raise ValueError("precomputed evaluation needs an embedding store")
        provider = PrecomputedEncoder(store, expected_dim=cfg.dim if cfg else None)
    if spec_log is not None:
        for i in range(iters):
            spec_log.append(sample_episode_spec(derive_rng(seed, i), ds, n_way, k_shot, q_queries))
    jobs = [
        (i, seed, ds, rel_info, provider, state.fusion, n_way, k_shot, q_queries)
        for i in range(iters)
    ]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(_eval_episode, jobs))
    else:
        outcomes = [_eval_episode(j) for j in jobs]
    correct = sum(o[0] for o in outcomes)
    total = sum(o[1] for o in outcomes)
    losses = [o[2] for o in outcomes]
    acc = correct / total
    stderr = float(np.sqrt(acc * (1.0 - acc) / total))
    return RunResult(
        accuracy=acc,
        stderr=stderr,
        loss_curve=losses,
        config=asdict(cfg) if cfg is not None else {},
        wall_time=time.perf_counter() - started,
    )


@dataclass
class StrategyRow:
    label: str
    fusion: str
    result: RunResult


def run_once(
    cfg: TrainConfig,
    train_ds: Dataset,
    eval_ds: Dataset,
    rel_info: dict[str, RelationInfo],
    store: EmbeddingStore | None = None,
    threads: int = 1,
) -> tuple[ModelState, list[float], RunResult]:
    """Init, train, evaluate; the building block of ablations and sweeps."""
    state = init_state(cfg)
    history = train(cfg, train_ds, rel_info, state, store=store)
    result = evaluate(
        state, eval_ds, rel_info, cfg.n_way, cfg.k_shot, cfg.q_queries,
        cfg.eval_iters, cfg.seed, store=store, cfg=cfg, threads=threads,
    )
    return state, history, result


def ablation_run(
    cfg: TrainConfig,
    train_ds: Dataset,
    eval_ds: Dataset,
    rel_info: dict[str, RelationInfo],
    store: EmbeddingStore | None = None,
    threads: int = 1,
) -> list[StrategyRow]:
    """One row per fusion strategy, ablation-table order, all sharing cfg.seed
    (and therefore identical training and evaluation episode streams)."""
    rows = []
    for kind in FUSION_IDS:
        run_cfg = TrainConfig(**{**asdict(cfg), "fusion": kind})
        state, history, result = run_once(run_cfg, train_ds, eval_ds, rel_info, store, threads)
        result.loss_curve = history
        rows.append(StrategyRow(label=state.fusion.label, fusion=kind, result=result))
    return rows


@dataclass
class SweepRow:
    rate: float
    result: RunResult


def lr_sweep(
    cfg: TrainConfig,
    rates: list[float],
    train_ds: Dataset,
    eval_ds: Dataset,
    rel_info: dict[str, RelationInfo],
    store: EmbeddingStore | None = None,
    threads: int = 1,
) -> list[SweepRow]:
    """Independent train+evaluate per learning rate, shared seed."""
    if not rates:
        raise ValueError("lr sweep needs at least one rate")
    rows = []
    for rate in rates:
        run_cfg = TrainConfig(**{**asdict(cfg), "learning_rate": rate})
        _, history, result = run_once(run_cfg, train_ds, eval_ds, rel_info, store, threads)
        result.loss_curve = history
        rows.append(SweepRow(rate=rate, result=result))
    return rows


def setting_label(n_way: int, k_shot: int) -> str:
    return f"{n_way}-w-{k_shot}-s"


def render_report(
    rows: dict[str, dict[str, float]],
    include_reference: bool = False,
    title: str | None = None,
) -> str:
    """Markdown accuracy table with N-w-K-s columns.

    rows maps a row label to {setting: accuracy in percent}. With
    include_reference the published validation baselines are appended.
    """
    all_rows = dict(rows)
    if include_reference:
        for name, vals in REFERENCE_VALIDATION.items():
            all_rows[f"{name} (reported val)"] = vals
    settings: list[str] = []
    for vals in all_rows.values():
        for s in vals:
            if s not in settings:
                settings.append(s)
    lines = []
    if title:
        lines.append(f"## {title}")
        lines.append("")
    lines.append("| Model | " + " | ".join(settings) + " |")
    lines.append("|---" * (len(settings) + 1) + "|")
    for label, vals in all_rows.items():
        cells = [f"{vals[s]:.2f}" if s in vals else "---" for s in settings]
        lines.append(f"| {label} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def render_ablation(rows: list[StrategyRow], setting: str) -> str:
    table = {row.label: {setting: 100.0 * row.result.accuracy} for row in rows}
    return render_report(table, title=f"Fusion ablation ({setting})")


def render_sweep(rows: list[SweepRow], setting: str) -> str:
    lines = ["| Setting | " + " | ".join(f"lr={r.rate:g}" for r in rows) + " |"]
    lines.append("|---" * (len(rows) + 1) + "|")
    lines.append(
        f"| {setting} | " + " | ".join(f"{100 * r.result.accuracy:.2f}" for r in rows) + " |"
    )
    avg = [100 * r.result.accuracy for r in rows]
    lines.append("| Average | " + " | ".join(f"{a:.2f}" for a in avg) + " |")
    return "\n".join(lines) + "\n"


def save_checkpoint(state: ModelState, cfg: TrainConfig, path) -> None:
    """Header line (config echo, dim, strategy) + one parameter block per line,
    floats in shortest round-trip decimal form."""
    header = {
        "config": asdict(cfg),
        "dim": cfg.dim,
        "strategy": cfg.fusion,
        "encoder": cfg.encoder,
    }
    lines = [json.dumps(header)]
    for name, p in state.parameters().items():
        lines.append(json.dumps({"name": name, "shape": list(p.shape), "data": p.ravel().tolist()}))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_checkpoint(path) -> tuple[ModelState, TrainConfig]:
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise FileNotFoundError(f"cannot read {path}: {exc}") from exc
    if not lines:
        raise FormatError(f"{path}: empty checkpoint")
    try:
        header = json.loads(lines[0])
        blocks = [json.loads(line) for line in lines[1:] if line.strip()]
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: malformed checkpoint: {exc}") from exc
    cfg = TrainConfig(**header["config"])
    arrays = {}
    for block in blocks:
        arr = np.array(block["data"], dtype=np.float64).reshape(block["shape"])
        arrays[block["name"]] = arr
    state = init_state(cfg)
    for name, p in state.parameters().items():
        if name not in arrays:
            raise FormatError(f"{path}: checkpoint missing parameter {name!r}")
        if arrays[name].shape != p.shape:
            raise FormatError(
                f"{path}: parameter {name!r} has shape {arrays[name].shape}, expected {p.shape}"
            )
        p[...] = arrays[name]
    return state, cfg

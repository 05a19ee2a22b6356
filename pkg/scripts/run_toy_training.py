"""Train the toy encoder end to end on the synthetic token task and report
before/after accuracy for the direct-addition fusion.

Usage: python scripts/run_toy_training.py [--iters 2000] [--seed 7]
"""

import argparse

import numpy as np

from relproto.experiments import TrainConfig, evaluate, init_state, render_report, setting_label, train
from relproto.synthetic import token_cluster_task


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--iters", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--n-way", type=int, default=5)
    ap.add_argument("--k-shot", type=int, default=1)
    args = ap.parse_args()

    ds, rel_info = token_cluster_task(seed=args.seed, n_classes=20, instances_per_class=40)
    cfg = TrainConfig(n_way=args.n_way, k_shot=args.k_shot, train_iters=args.iters,
                      eval_iters=400, learning_rate=1e-3, seed=args.seed,
                      fusion="direct_add", encoder="toy")
    state = init_state(cfg)
    before = evaluate(state, ds, rel_info, cfg.n_way, cfg.k_shot, cfg.q_queries,
                      cfg.eval_iters, seed=args.seed + 1, cfg=cfg)
    history = train(cfg, ds, rel_info, state)
    after = evaluate(state, ds, rel_info, cfg.n_way, cfg.k_shot, cfg.q_queries,
                     cfg.eval_iters, seed=args.seed + 1, cfg=cfg)

    print(f"training loss: {history[0]:.4f} -> {np.mean(history[-100:]):.4f} "
          f"(mean of last 100 iters)")
    setting = setting_label(cfg.n_way, cfg.k_shot)
    print(render_report(
        {
            "toy untrained": {setting: 100 * before.accuracy},
            "toy trained": {setting: 100 * after.accuracy},
        },
        include_reference=True,
        title="Toy encoder, synthetic token task",
    ))


if __name__ == "__main__":
    main()

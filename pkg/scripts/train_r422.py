"""Train the shipped 4x4 (two items, two escorts) checkpoint."""

import argparse
import logging
from pathlib import Path

from pbslab.instances import series
from pbslab.rl import Agent, TrainConfig, series_sampler, train, write_metrics

log = logging.getLogger("train_r422")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--episodes", type=int, default=20000)
    ap.add_argument("--seed", type=int, default=20240501)
    ap.add_argument("--target-sync", type=int, default=20, help="episodes between target-network refreshes")
    ap.add_argument("--normalize", action=argparse.BooleanOptionalAction, default=True,
                    help="scale coordinates to [0, 1] before they reach the network")
    ap.add_argument("--out", default="checkpoints/r422.json")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    spec = series("R422", 1)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    window = []

    def progress(rec, net):
        window.append(rec)
        if (rec.episode + 1) % 250 == 0:
            solved = sum(r.solved for r in window) / len(window)
            steps = sum(r.steps for r in window) / len(window)
            log.info("ep %d eps %.3f solved %.3f steps %.1f loss %.4g", rec.episode + 1, rec.epsilon,
                     solved, steps, rec.loss)
            window.clear()
            Agent(net.copy(), 4, 4, 2, 2, args.normalize, meta={"partial_episodes": rec.episode + 1}).save(out.with_suffix(".partial.json"))

    agent, metrics = train(series_sampler(spec), TrainConfig(episodes=args.episodes, seed=args.seed, target_sync=args.target_sync,
                                                                  normalize=args.normalize), progress)
    agent.save(out)
    write_metrics(metrics, out.with_suffix(".metrics.csv"))


if __name__ == "__main__":
    main()

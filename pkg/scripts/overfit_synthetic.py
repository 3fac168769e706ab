"""Train the default network on a 10-engine synthetic bundle and print the learning curve."""

import argparse
import time

from rulnet.cmapss_io import generate_synthetic
from rulnet.network import Model
from rulnet.training import TrainConfig, dataset_rmse, prepare_splits, train_one


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--epochs", type=int, default=300)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--data-seed", type=int, default=0)
    ap.add_argument("--conditions", type=int, default=1)
    args = ap.parse_args()

    bundle = generate_synthetic(10, 5, 140, 180, args.conditions, args.data_seed)
    cfg = TrainConfig(max_epochs=args.epochs, patience=args.epochs, seed=args.seed)
    _, train_set, val_set = prepare_splits(cfg, bundle)
    t0 = time.perf_counter()
    params, hist = train_one(cfg, train_set, val_set)
    for epoch in range(0, len(hist.train_loss), 25):
        print(f"epoch {epoch + 1:4d}  train loss {hist.train_loss[epoch]:.4f}  val RMSE {hist.val_rmse[epoch]:.2f}")
    rmse = dataset_rmse(Model(cfg.arch, params), train_set)
    print(f"best epoch {hist.best_epoch}: training RMSE {rmse:.4f} normalized "
          f"({rmse * cfg.cap:.2f} cycles) in {time.perf_counter() - t0:.0f}s")


if __name__ == "__main__":
    main()

"""CSV data behind the labeling and metric figures: gold vs true RUL, score vs squared error."""

import argparse
import csv
from pathlib import Path

import numpy as np

from rulnet.evaluation import score_term
from rulnet.preprocess import gold_rul_train


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="results/figures")
    ap.add_argument("--length", type=int, default=250)
    ap.add_argument("--cap", type=int, default=130)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    gold = gold_rul_train(args.length, args.cap)
    with open(out / "gold_rul.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["cycle", "true_rul", "gold_rul"])
        for t, g in enumerate(gold, start=1):
            w.writerow([t, args.length - t, int(g)])

    d = np.linspace(-50, 50, 201)
    with open(out / "score_vs_error.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["error", "score_term", "squared_error"])
        for e, s in zip(d, score_term(d)):
            w.writerow([repr(float(e)), repr(float(s)), repr(float(e * e))])
    print(f"wrote {out / 'gold_rul.csv'} and {out / 'score_vs_error.csv'}")


if __name__ == "__main__":
    main()

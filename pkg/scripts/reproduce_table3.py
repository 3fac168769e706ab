"""Multi-seed evaluation over the C-MAPSS subsets, full model and no-feature-MLP variant.

    python scripts/reproduce_table3.py --data-root data/CMAPSS --seeds 1,2,3 --datasets FD001,FD002
"""

import argparse
import json
from dataclasses import replace
from pathlib import Path

from rulnet.cli import format_table, summary_row
from rulnet.cmapss_io import load_dataset
from rulnet.training import TrainConfig, multi_run


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--data-root", required=True)
    ap.add_argument("--datasets", default="FD001,FD002,FD003,FD004")
    ap.add_argument("--seeds", default=",".join(str(s) for s in range(1, 11)))
    ap.add_argument("--max-epochs", type=int, default=200)
    ap.add_argument("--no-ablation", action="store_true")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", default="results/table3.json")
    args = ap.parse_args()

    seeds = [int(s) for s in args.seeds.split(",")]
    base = TrainConfig(max_epochs=args.max_epochs)
    rows = []
    for ds in args.datasets.split(","):
        bundle = load_dataset(args.data_root, ds)
        rows.append(summary_row("MLP-LSTM-MLP", multi_run(base, bundle, seeds, jobs=args.jobs)))
        if not args.no_ablation:
            ablated = replace(base, arch=replace(base.arch, ablate_feature_mlp=True))
            rows.append(summary_row("LSTM without first MLP", multi_run(ablated, bundle, seeds, jobs=args.jobs)))
        print(format_table(rows[-2:] if not args.no_ablation else rows[-1:]), flush=True)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps({"seeds": seeds, "rows": rows}, indent=2))
    print(format_table(rows))


if __name__ == "__main__":
    main()

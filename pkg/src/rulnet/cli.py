"""Command-line front end: prepare, train, experiment, eval, export-activations."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

from .cmapss_io import (DATASET_NAMES, DatasetBundle, dataset_paths, generate_synthetic,
                        length_summary, load_dataset)
from .config import ConfigError, RunConfig, dump_config, load_config
from .evaluation import (PAPER_ABLATION, PAPER_TABLE3, evaluate, export_activations,
                         matrix_csv)
from .network import Model
from .persistence import Checkpoint, CheckpointError, config_digest, load_checkpoint, save_checkpoint
from .preprocess import fit_normalizer, prepare
from .training import (MultiRunResult, SeedFailed, TrainingDiverged, multi_run,
                       prepare_splits, train_one)

log = logging.getLogger("rulnet")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _resolve_config(args) -> RunConfig:
    text = Path(args.config).read_text(encoding="utf-8") if getattr(args, "config", None) else None
    cfg = load_config(text)
    train = cfg.train
    if getattr(args, "dataset", None):
        cfg = replace(cfg, dataset=args.dataset)
    if getattr(args, "data_root", None):
        cfg = replace(cfg, data_root=args.data_root)
    if getattr(args, "cap", None) is not None:
        train = replace(train, cap=args.cap)
    if getattr(args, "seed", None) is not None:
        train = replace(train, seed=args.seed)
    if getattr(args, "ablate", False):
        train = replace(train, arch=replace(train.arch, ablate_feature_mlp=True))
    return replace(cfg, train=train)


def load_bundle(cfg: RunConfig) -> DatasetBundle:
    if cfg.dataset == "SYNTH":
        return generate_synthetic(cfg.synth_num_train, cfg.synth_num_test, cfg.synth_min_len,
                                  cfg.synth_max_len, cfg.synth_num_conditions, cfg.synth_seed)
    return load_dataset(cfg.data_root, cfg.dataset)


def _write_manifest(out: Path, command: str, cfg: RunConfig, seeds, outputs, metrics,
                    started: str) -> None:
    manifest = {
        "command": command,
        "config_digest": config_digest(dump_config(cfg)),
        "config": dump_config(cfg),
        "seeds": list(seeds),
        "dataset": cfg.dataset,
        "started": started,
        "finished": _now(),
        "outputs": sorted(str(p) for p in outputs),
        "metrics": metrics,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2), encoding="utf-8")


def _labeled_csv(labeled) -> str:
    rows = [["unit_id", "cycle"] + [f"x{i}" for i in range(labeled[0].frames.shape[1])]
            + ["gold_rul", "target"]] if labeled else [["unit_id", "cycle"]]
    for lt in labeled:
        for t, (frame, gold, target) in enumerate(zip(lt.frames, lt.gold_rul, lt.target), start=1):
            rows.append([lt.unit_id, t] + [repr(float(v)) for v in frame] + [int(gold), repr(float(target))])
    return "\n".join(",".join(str(c) for c in row) for row in rows) + "\n"


def cmd_prepare(args) -> int:
    started = _now()
    cfg = _resolve_config(args)
    if cfg.dataset != "SYNTH":
        for path in dataset_paths(cfg.data_root, cfg.dataset).values():
            if not path.is_file():
                raise FileNotFoundError(f"missing C-MAPSS file: {path}")
    bundle = load_bundle(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cap = cfg.train.cap
    stats = fit_normalizer(bundle.train)
    train_l = prepare(bundle.train, stats, cap)
    test_l = prepare(bundle.test, stats, cap)
    written = [out / "stats.json", out / "train_labeled.csv", out / "test_labeled.csv",
               out / "summary.json"]
    written[0].write_text(stats.to_json(), encoding="utf-8")
    written[1].write_text(_labeled_csv(train_l), encoding="utf-8")
    written[2].write_text(_labeled_csv(test_l), encoding="utf-8")
    summary = {"dataset": bundle.name, "cap": cap,
               "train": length_summary(bundle.train), "test": length_summary(bundle.test)}
    written[3].write_text(json.dumps(summary, indent=2), encoding="utf-8")

    print(f"{'DATASET':<24}{bundle.name:>10}")
    print(f"{'Nb Train trajectories':<24}{summary['train']['count']:>10}")
    print(f"{'Nb Test trajectories':<24}{summary['test']['count']:>10}")
    for key in ("max", "mean", "min"):
        print(f"{'Train length ' + key:<24}{summary['train'][key]:>10.0f}")
    _write_manifest(out, "prepare", cfg, [cfg.synth_seed] if cfg.dataset == "SYNTH" else [],
                    written, summary, started)
    return 0


def cmd_train(args) -> int:
    started = _now()
    cfg = _resolve_config(args)
    bundle = load_bundle(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stats, train_set, val_set = prepare_splits(cfg.train, bundle)
    params, history = train_one(cfg.train, train_set, val_set)
    digest = config_digest(dump_config(cfg))
    ckpt = Checkpoint(cfg.train.arch, params, stats, digest, cap=cfg.train.cap)
    report = evaluate(Model(cfg.train.arch, params), bundle.name, bundle.test, bundle.test_rul,
                      stats, cfg.train.cap, cfg.cap_test_targets)
    written = [out / "checkpoint.rulm", out / "history.csv", out / "eval_report.json"]
    save_checkpoint(ckpt, written[0])
    written[1].write_text(history.to_csv(), encoding="utf-8")
    written[2].write_text(report.to_json(), encoding="utf-8")
    metrics = {**report.metrics(), "best_epoch": history.best_epoch,
               "best_val_rmse": history.val_rmse[history.best_epoch - 1]}
    print(f"best epoch {history.best_epoch}  val RMSE {metrics['best_val_rmse']:.2f}  "
          f"test RMSE {report.rmse_last_cycle:.2f}  score {report.score_last_cycle:.2f}")
    _write_manifest(out, "train", cfg, [cfg.train.seed], written, metrics, started)
    return 0


def _parse_seeds(text: str) -> list[int]:
    try:
        seeds = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise ValueError(f"bad --seeds value {text!r}") from None
    if not seeds:
        raise ValueError("--seeds must list at least one integer")
    return seeds


def summary_row(label: str, res: MultiRunResult) -> dict:
    s = res.summary
    return {
        "model": label, "dataset": res.dataset, "ablated": res.ablated,
        "seeds": [r.seed for r in res.runs],
        "rmse_mean": s["rmse_last_cycle"][0], "rmse_std": s["rmse_last_cycle"][1],
        "score_mean": s["score_last_cycle"][0], "score_std": s["score_last_cycle"][1],
        "rmse_per_cycle_mean": s["rmse_per_cycle"][0], "rmse_per_cycle_std": s["rmse_per_cycle"][1],
        "score_per_cycle_mean": s["score_per_cycle"][0], "score_per_cycle_std": s["score_per_cycle"][1],
        "runs": [{"seed": r.seed, **r.report.metrics(), "best_epoch": r.history.best_epoch}
                 for r in res.runs],
    }


def format_table(rows: list[dict]) -> str:
    head = f"{'MODEL':<28}{'DATASET':<9}{'RMSE':>18}{'SCORE':>22}"
    lines = [head, "-" * len(head)]
    for row in rows:
        rmse = f"{row['rmse_mean']:.2f} ± {row['rmse_std']:.2f}"
        score = f"{row['score_mean']:.2f} ± {row['score_std']:.2f}"
        lines.append(f"{row['model']:<28}{row['dataset']:<9}{rmse:>18}{score:>22}")
    for row in rows:
        ref = (PAPER_ABLATION if row["ablated"] else PAPER_TABLE3).get(row["dataset"])
        if ref:
            r = ref["rmse"][0] if isinstance(ref["rmse"], tuple) else ref["rmse"]
            sc = ref["score"][0] if isinstance(ref["score"], tuple) else ref["score"]
            lines.append(f"  published reference for {row['model']} on {row['dataset']}: "
                         f"RMSE {r:.2f}, score {sc:.2f}")
    return "\n".join(lines) + "\n"


def cmd_experiment(args) -> int:
    started = _now()
    cfg = _resolve_config(replace_ns(args, ablate=False))
    seeds = _parse_seeds(args.seeds) if args.seeds else [cfg.train.seed]
    bundle = load_bundle(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    variants = [("MLP-LSTM-MLP", cfg)]
    if args.ablate:
        ablated = replace(cfg, train=replace(cfg.train, arch=replace(cfg.train.arch, ablate_feature_mlp=True)))
        variants.append(("LSTM without first MLP", ablated))

    stats = fit_normalizer(bundle.train)
    rows, written = [], []
    for label, vcfg in variants:
        res = multi_run(vcfg.train, bundle, seeds, jobs=args.jobs)
        rows.append(summary_row(label, res))
        sub = out / ("ablated" if vcfg.train.arch.ablate_feature_mlp else "full")
        for run in res.runs:
            run_dir = sub / f"seed_{run.seed}"
            run_dir.mkdir(parents=True, exist_ok=True)
            (run_dir / "history.csv").write_text(run.history.to_csv(), encoding="utf-8")
            save_checkpoint(Checkpoint(vcfg.train.arch, run.params, stats,
                                       config_digest(dump_config(vcfg)), cap=vcfg.train.cap),
                            run_dir / "checkpoint.rulm")
            written += [run_dir / "history.csv", run_dir / "checkpoint.rulm"]

    report = {"dataset": bundle.name, "rows": rows}
    (out / "report.json").write_text(json.dumps(report, indent=2), encoding="utf-8")
    table = format_table(rows)
    (out / "report.txt").write_text(table, encoding="utf-8")
    written += [out / "report.json", out / "report.txt"]
    print(table, end="")
    _write_manifest(out, "experiment", cfg, seeds, written,
                    {r["model"]: {"rmse": [r["rmse_mean"], r["rmse_std"]],
                                  "score": [r["score_mean"], r["score_std"]]} for r in rows},
                    started)
    return 0


def replace_ns(ns: argparse.Namespace, **kw) -> argparse.Namespace:
    return argparse.Namespace(**{**vars(ns), **kw})


def _checkpoint_and_bundle(args) -> tuple[Checkpoint, RunConfig, DatasetBundle]:
    ckpt = load_checkpoint(args.checkpoint)
    cfg = _resolve_config(args)
    return ckpt, cfg, load_bundle(cfg)


def cmd_eval(args) -> int:
    started = _now()
    ckpt, cfg, bundle = _checkpoint_and_bundle(args)
    cap = args.cap if args.cap is not None else ckpt.cap
    report = evaluate(Model(ckpt.architecture, ckpt.params), bundle.name, bundle.test,
                      bundle.test_rul, ckpt.normalization, cap, cfg.cap_test_targets)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = [out / "eval_report.json", out / "residuals.csv"]
    written[0].write_text(report.to_json(), encoding="utf-8")
    written[1].write_text(report.residuals_csv(), encoding="utf-8")
    print(f"{bundle.name}: last-cycle RMSE {report.rmse_last_cycle:.2f}  score {report.score_last_cycle:.2f}  "
          f"| per-cycle RMSE {report.rmse_per_cycle:.2f}  score {report.score_per_cycle:.2f}")
    _write_manifest(out, "eval", cfg, [], written, report.metrics(), started)
    return 0


def cmd_export_activations(args) -> int:
    started = _now()
    ckpt, cfg, bundle = _checkpoint_and_bundle(args)
    pool = bundle.train if args.split == "train" else bundle.test
    matches = [t for t in pool if t.unit_id == args.unit]
    if not matches:
        raise ValueError(f"unit {args.unit} not found in {bundle.name} {args.split} split")
    acts = export_activations(Model(ckpt.architecture, ckpt.params), matches[0], ckpt.normalization)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = [out / "inputs.csv", out / "lstm.csv", out / "prediction.csv"]
    written[0].write_text(matrix_csv(acts.inputs, "x"), encoding="utf-8")
    written[1].write_text(matrix_csv(acts.hidden, "h"), encoding="utf-8")
    written[2].write_text(matrix_csv(acts.prediction, "y"), encoding="utf-8")
    metrics = {"cycles": int(acts.inputs.shape[0]),
               "mean_abs_step_lstm": acts.mean_abs_step("hidden")}
    if acts.features is not None:
        written.append(out / "features.csv")
        written[-1].write_text(matrix_csv(acts.features, "f"), encoding="utf-8")
        metrics["mean_abs_step_features"] = acts.mean_abs_step("features")
    print(json.dumps(metrics))
    _write_manifest(out, "export-activations", cfg, [], written, metrics, started)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rulnet", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--data-root")
        p.add_argument("--dataset", choices=DATASET_NAMES)
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--cap", type=int)
        p.add_argument("--out", required=out_required)

    p = sub.add_parser("prepare", help="normalize and label a dataset")
    common(p)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train one model")
    common(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--ablate", action="store_true", help="drop the feature MLP")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("experiment", help="multi-seed mean ± std report")
    common(p)
    p.add_argument("--seeds", help="comma-separated seeds, e.g. 1,2,3")
    p.add_argument("--seed", type=int)
    p.add_argument("--ablate", action="store_true", help="also run the no-feature-MLP variant")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a test set")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export-activations", help="dump per-cycle layer outputs as CSV")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--unit", type=int, required=True)
    p.add_argument("--split", choices=("train", "test"), default="train")
    p.set_defaults(func=cmd_export_activations)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, CheckpointError, TrainingDiverged, SeedFailed,
            FileNotFoundError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

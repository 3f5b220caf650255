"""``alr-lab`` command-line entry point.

Exit codes: 0 success, 1 check failure, 2 config/usage error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, demo
from .config import METHODS, ExperimentConfig, load_config
from .errors import ConfigError
from .gradcheck import LOSS_TERMS, format_report, run_gradcheck
from .residual import export_rows, format_row, load_logits, save_logits
from .training import evaluate, load_datasets, train, write_metrics

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


def format_param_count(n: int) -> str:
    """Table-style count: ``90 -> '0.1K'``, ``9900 -> '10K'``, ``11170000 -> '11.17M'``."""
    if n < 50:
        return str(n)  # would round to 0.0K
    if n < 1000:
        return f"{n / 1000:.1f}K"
    if n < 1_000_000:
        return f"{n / 1000:.0f}K"
    return f"{n / 1e6:.2f}M"


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> dict:
    """Train one configuration and write its artifacts; returns the summary."""
    out = Path(cfg.output_dir if out_dir is None else out_dir)
    train_ds, test_ds = load_datasets(cfg)
    result = train(cfg, train_ds, test_ds)
    out.mkdir(parents=True, exist_ok=True)
    write_metrics(result.history, out / "metrics.csv")
    for epoch, S in sorted(result.snapshots.items()):
        export_rows(S, out / f"S_epoch{epoch}.csv", "csv", "residual")
        export_rows(S, out / f"S_epoch{epoch}.pgm", "pgm", "full-K")
        save_logits(S, out / f"S_epoch{epoch}.logits.csv")
    K = result.num_classes
    backbone = result.state.model.num_params
    overhead = result.state.S.num_params if result.state.S is not None else 0
    final = result.final
    summary = {
        "method": cfg.method,
        "seed": cfg.seed,
        "num_classes": K,
        "epochs": cfg.epochs,
        "final": {
            "train_acc": final.train_acc,
            "test_acc": final.test_acc,
            "mean_row_entropy": None if np.isnan(final.mean_row_entropy) else final.mean_row_entropy,
        },
        "param_counts": {
            "backbone": backbone,
            "residual": overhead,
            "total": backbone + overhead,
            "display": format_param_count(backbone) + (f" + {format_param_count(overhead)}" if overhead else ""),
        },
        "param_overhead": overhead,
        "snapshot_epochs": sorted(result.snapshots),
        "config": cfg.to_json_dict(),
        # Excluded from reproducibility comparisons.
        "created_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    if cfg.top_m is not None:
        summary["final"][f"test_top{cfg.top_m}_acc"] = evaluate(result.state.model, test_ds, cfg.top_m)[2]
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return summary


def _parse_list(text: str, kind, name: str) -> list:
    try:
        items = [kind(x.strip()) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(name, f"cannot parse {text!r}") from None
    if not items:
        raise ConfigError(name, "empty list")
    return items


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    if args.output_dir:
        cfg = cfg.replace(output_dir=args.output_dir)
    summary = run_experiment(cfg)
    f = summary["final"]
    print(f"{cfg.method}: train_acc={f['train_acc']:.4f} test_acc={f['test_acc']:.4f} "
          f"params={summary['param_counts']['display']} -> {cfg.output_dir}")
    return EXIT_OK


def _compare_cell(cell):
    cfg, out = cell
    return run_experiment(cfg, out)["final"]["test_acc"]


def cmd_compare(args) -> int:
    base = load_config(args.config)
    methods = _parse_list(args.methods, str, "--methods") if args.methods else [base.method]
    for m in methods:
        if m not in METHODS:
            raise ConfigError("--methods", f"unknown method {m!r}; choose from {', '.join(METHODS)}")
    seeds = _parse_list(args.seeds, int, "--seeds") if args.seeds else [base.seed]
    root = Path(args.output_dir or base.output_dir)
    cells = []
    for m in methods:
        for s in seeds:
            try:
                cfg = ExperimentConfig.model_validate({**base.to_json_dict(), "method": m, "seed": s})
            except ValueError as exc:
                raise ConfigError(f"method={m}", str(exc).splitlines()[-1]) from None
            cells.append((cfg, root / m / f"seed{s}"))
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            accs = list(pool.map(_compare_cell, cells))
    else:
        accs = [_compare_cell(c) for c in cells]
    root.mkdir(parents=True, exist_ok=True)
    lines = ["method,runs,test_acc_mean,test_acc_std"]
    runs = ["method,seed,test_acc"]
    for i, m in enumerate(methods):
        vals = np.array(accs[i * len(seeds):(i + 1) * len(seeds)])
        std = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
        lines.append(f"{m},{len(vals)},{np.mean(vals):.9g},{std:.9g}")
        runs += [f"{m},{s},{a:.9g}" for s, a in zip(seeds, vals)]
    (root / "compare.csv").write_text("\n".join(lines) + "\n")
    (root / "runs.csv").write_text("\n".join(runs) + "\n")
    print("\n".join(lines))
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    rows = run_gradcheck(points=args.points, seed=args.seed, normalize=args.normalize_prefactor,
                         corrupt=args.corrupt)
    print(format_report(rows))
    ok = all(r.ok for r in rows)
    print("all gradients verified" if ok else "gradient check FAILED")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_kd_demo(args) -> int:
    print(demo.report())
    return EXIT_OK


def cmd_export_heatmap(args) -> int:
    run = Path(args.run_dir)
    if not run.is_dir():
        raise ConfigError("--run-dir", f"not a directory: {run}")
    epochs = _parse_list(args.epochs, int, "--epochs")
    matrices = {}
    for e in epochs:
        path = run / f"S_epoch{e}.logits.csv"
        if not path.is_file():
            raise ConfigError("--epochs", f"no snapshot for epoch {e} in {run}")
        matrices[e] = load_logits(path)
    out = Path(args.output_dir) if args.output_dir else run
    out.mkdir(parents=True, exist_ok=True)
    lines = ["epoch,mean_row_entropy"]
    for e, S in matrices.items():
        export_rows(S, out / f"heatmap_epoch{e}.pgm", "pgm", "full-K")
        export_rows(S, out / f"heatmap_epoch{e}.csv", "csv", "full-K")
        lines.append(f"{e},{format_row([float(np.mean(S.row_entropy()))])}")
    (out / "entropy.csv").write_text("\n".join(lines) + "\n")
    print(f"wrote {len(matrices)} heatmaps and entropy.csv to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="alr-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one configuration")
    p.add_argument("-c", "--config", required=True)
    p.add_argument("-o", "--output-dir")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("compare", help="methods x seeds sweep with mean/std of test accuracy")
    p.add_argument("-c", "--config", required=True)
    p.add_argument("--methods", help="comma-separated, e.g. baseline,lsr,alr,alr-s")
    p.add_argument("--seeds", help="comma-separated integers, e.g. 1,2,3,4,5")
    p.add_argument("-o", "--output-dir")
    p.add_argument("-j", "--jobs", type=int, default=1)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("gradcheck", help="finite-difference check of all analytic gradients")
    p.add_argument("--points", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--normalize-prefactor", action="store_true")
    p.add_argument("--corrupt", choices=LOSS_TERMS + ("mlp",), help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("kd-demo", help="show the hard/soft gradient contradiction")
    p.set_defaults(func=cmd_kd_demo)

    p = sub.add_parser("export-heatmap", help="full-K heatmaps and entropy trajectory of a run")
    p.add_argument("-r", "--run-dir", required=True)
    p.add_argument("-e", "--epochs", required=True, help="comma-separated epochs")
    p.add_argument("-o", "--output-dir")
    p.set_defaults(func=cmd_export_heatmap)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"alr-lab: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"alr-lab: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

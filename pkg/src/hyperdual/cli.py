"""Command-line front end.

Exit codes: 0 success, 1 configuration error, 2 runtime or numeric failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import config as C
from .data import DataFormatError, export_bundled_mnist
from .errors import ConfigError
from .experiment import ABLATION_MODES, Experiment
from .tensor import DegenerateNeighborhoodError, NonFiniteError
from .train import (TrainingError, format_mean_std, mean_std, write_metrics, write_rows,
                    write_summary)

log = logging.getLogger("hyperdual")

SWEEP_PARAMS = ("lambda", "views", "delta1", "eta")

# flag -> config key, for the dedicated override flags
FLAG_KEYS = {
    "seed": "seed", "repeats": "repeats", "labels": "labels", "dataset": "dataset",
    "lam": "lambda", "eta": "eta", "delta1": "delta1", "delta2": "delta2", "views": "views",
    "heads": "heads", "hidden": "hidden", "k": "k",
}


class UsageError(ConfigError):
    pass


# ----------------------------------------------------------------------------
# argument parsing


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("configuration (defaults < --preset < --config < flags)")
    g.add_argument("--config", help="flat 'key = value' config file")
    g.add_argument("--preset", choices=C.PRESETS, help="built-in preset applied before --config")
    g.add_argument("--out-dir", default="results", help="output directory (default: results)")
    g.add_argument("--seed", type=int, help="seed of the first run (default 0)")
    g.add_argument("--repeats", type=int, help="runs with consecutive seeds (default 10)")
    g.add_argument("--labels", type=int, help="labelled training nodes")
    g.add_argument("--jobs", type=int, default=1, help="parallel runs (default 1)")
    g.add_argument("--dataset", choices=C.DATASETS, help="data source")
    g.add_argument("--lambda", dest="lam", type=float, help="cross-entropy weight")
    g.add_argument("--eta", type=float, help="learned-hypergraph blend weight")
    g.add_argument("--delta1", type=float, help="similarity threshold")
    g.add_argument("--delta2", type=float, help="density threshold")
    g.add_argument("--views", type=int, help="number of learned views")
    g.add_argument("--heads", type=int, help="attention heads")
    g.add_argument("--hidden", type=int, help="hidden width per head")
    g.add_argument("--k", type=int, help="k-NN hyperedge size")
    g.add_argument("--set", dest="sets", action="append", default=[], metavar="KEY=VALUE",
                   help="set any config key (repeatable)")
    g.add_argument("--plot", action="store_true", help="also render PNG figures (needs matplotlib)")
    g.add_argument("-v", "--verbose", action="store_true", help="log per-run progress")


def _key_table() -> str:
    rows = [f"  {k:<20} {v.default!r:<12} {v.help}" for k, v in C.SCHEMA.items()]
    return "config keys (default, meaning):\n" + "\n".join(rows)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hyperdual",
        description="Hypergraph structure learning with density-aware attention.",
        epilog=_key_table() + "\n\nHYPERDUAL_THREADS caps BLAS threads (1 for bitwise determinism).",
        formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train with repeated seeds; write metrics and summary CSVs")
    _common(p)

    p = sub.add_parser("ablate", help="compare full, no-hgl and no-density variants")
    _common(p)
    p.add_argument("--mode", action="append", choices=ABLATION_MODES,
                   help="variant to run (repeatable; default: all three)")

    p = sub.add_parser("sweep", help="one summary row per parameter value")
    _common(p)
    p.add_argument("param", choices=SWEEP_PARAMS)
    p.add_argument("values", nargs="*",
                   help="explicit values, an integer range 'A..B', or 'START STOP step STEP'")

    p = sub.add_parser("export-mnist", help="write the MNIST digits bundled with mlxtend as IDX files")
    p.add_argument("--out-dir", default="data", help="target directory (default: data)")
    return parser


def overrides_from(args) -> dict:
    out = {}
    for item in args.sets:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}", key)
        out[key.strip()] = C.parse_value(key.strip(), value)
    for flag, key in FLAG_KEYS.items():
        value = getattr(args, flag, None)
        if value is not None:
            out[key] = value
    return out


_INT_RANGE = re.compile(r"^(-?\d+)\.\.(-?\d+)$")


def parse_sweep_values(param: str, tokens: list[str]) -> list:
    """Expand the sweep value list; an empty result is a usage error."""
    if len(tokens) == 4 and tokens[2].lower() == "step":
        start, stop, step = (float(t) for t in (tokens[0], tokens[1], tokens[3]))
        if step <= 0 or stop < start:
            raise UsageError("sweep range needs STEP > 0 and STOP >= START", param)
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        values = [round(start + i * step, 10) for i in range(count)]
    elif len(tokens) == 1 and _INT_RANGE.match(tokens[0]):
        lo, hi = (int(g) for g in _INT_RANGE.match(tokens[0]).groups())
        values = list(range(lo, hi + 1))
    else:
        values = [C.parse_value(param, t) for t in tokens]
    if not values:
        raise UsageError(f"sweep {param}: empty value list", param)
    return [C.parse_value(param, repr(v) if isinstance(v, float) else str(v)) for v in values]


# ----------------------------------------------------------------------------
# running


def apply_thread_limit():
    """Honour HYPERDUAL_THREADS; returns the threadpoolctl limiter or None."""
    raw = os.environ.get("HYPERDUAL_THREADS")
    if raw is None:
        return None
    try:
        n = int(raw)
        if n < 1:
            raise ValueError
    except ValueError:
        raise ConfigError(f"HYPERDUAL_THREADS must be a positive integer, got {raw!r}",
                          "HYPERDUAL_THREADS") from None
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


_WORKER_CACHE: dict = {}


def _run_one(cfg: dict, seed: int, mode: str):
    key = C.render(cfg)
    exp = _WORKER_CACHE.get(key)
    if exp is None:
        _WORKER_CACHE.clear()
        exp = _WORKER_CACHE[key] = Experiment(cfg)
    return exp.run(seed, mode)


def _worker_init():
    apply_thread_limit()


def run_batch(tasks: list[tuple[dict, int, str]], jobs: int) -> list:
    """Run ``(cfg, seed, mode)`` tasks, in order, optionally in a process pool."""
    if jobs < 1:
        raise ConfigError("--jobs must be >= 1", "jobs")
    if jobs == 1 or len(tasks) == 1:
        return [_run_one(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs, initializer=_worker_init) as pool:
        return list(pool.map(_run_one, *zip(*tasks)))


def _write_runs(results, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    for r in results:
        write_metrics(r.history, os.path.join(out_dir, f"metrics_seed{r.seed}.csv"))
    write_summary(results, os.path.join(out_dir, "summary.csv"))


def _percent(results) -> list[float]:
    return [100.0 * r.test_accuracy for r in results]


def _seeds(cfg: dict) -> list[int]:
    return [cfg["seed"] + r for r in range(cfg["repeats"])]


def cmd_train(cfg: dict, args) -> int:
    results = run_batch([(cfg, s, "full") for s in _seeds(cfg)], args.jobs)
    _write_runs(results, args.out_dir)
    print(f"test accuracy (%): {format_mean_std(_percent(results))} over {len(results)} runs")
    if args.plot:
        from .plotting import plot_training

        plot_training(results, os.path.join(args.out_dir, "training.png"))
    return 0


def cmd_ablate(cfg: dict, args) -> int:
    modes = list(dict.fromkeys(args.mode or ABLATION_MODES))
    tasks = [(cfg, s, m) for m in modes for s in _seeds(cfg)]
    flat = run_batch(tasks, args.jobs)
    per_mode = {m: flat[i * cfg["repeats"]:(i + 1) * cfg["repeats"]] for i, m in enumerate(modes)}
    rows = []
    for m in modes:
        _write_runs(per_mode[m], os.path.join(args.out_dir, m))
        acc = _percent(per_mode[m])
        mu, sd = mean_std(acc)
        diff = ""
        if "full" in per_mode and m != "full":
            diff = f"{mean_std(_percent(per_mode['full']))[0] - mu:.4f}"
        rows.append([m, len(acc), f"{mu:.4f}", f"{sd:.4f}", format_mean_std(acc), diff])
        print(f"{m:<11} {format_mean_std(acc)}")
    write_rows(os.path.join(args.out_dir, "ablation.csv"),
               ("mode", "runs", "mean_acc", "std_acc", "mean±std", "full_minus_mode"), rows)
    if args.plot:
        from .plotting import plot_ablation

        plot_ablation({m: _percent(r) for m, r in per_mode.items()},
                      os.path.join(args.out_dir, "ablation.png"))
    return 0


def cmd_sweep(cfg: dict, args) -> int:
    values = parse_sweep_values(args.param, args.values)
    points = []
    for v in values:
        point = dict(cfg, **{args.param: v})
        C.validate(point)
        points.append(point)
    tasks = [(p, s, "full") for p in points for s in _seeds(cfg)]
    flat = run_batch(tasks, args.jobs)
    rows, curve = [], []
    for i, (v, point) in enumerate(zip(values, points)):
        res = flat[i * cfg["repeats"]:(i + 1) * cfg["repeats"]]
        sub = os.path.join(args.out_dir, f"{args.param}={v}")
        _write_runs(res, sub)
        C.write_resolved(point, os.path.join(sub, "config.resolved"))
        acc = _percent(res)
        mu, sd = mean_std(acc)
        rows.append([args.param, v, len(acc), f"{mu:.4f}", f"{sd:.4f}", format_mean_std(acc)])
        curve.append((v, mu, sd))
        print(f"{args.param}={v}: {format_mean_std(acc)}")
    write_rows(os.path.join(args.out_dir, "sweep.csv"),
               ("param", "value", "runs", "mean_acc", "std_acc", "mean±std"), rows)
    if args.plot:
        from .plotting import plot_sweep

        plot_sweep(args.param, curve, os.path.join(args.out_dir, "sweep.png"))
    return 0


def cmd_export_mnist(args) -> int:
    try:
        img, lab = export_bundled_mnist(args.out_dir)
    except ModuleNotFoundError:
        raise ConfigError("export-mnist needs the optional 'mlxtend' package", "mlxtend") from None
    print(f"mnist_images = {img}\nmnist_labels = {lab}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _limiter = apply_thread_limit()  # noqa: F841 - must stay alive for the run
        if args.command == "export-mnist":
            return cmd_export_mnist(args)
        cfg = C.resolve(args.preset, args.config, overrides_from(args))
        os.makedirs(args.out_dir, exist_ok=True)
        C.write_resolved(cfg, os.path.join(args.out_dir, "config.resolved"))
        handler = {"train": cmd_train, "ablate": cmd_ablate, "sweep": cmd_sweep}[args.command]
        return handler(cfg, args)
    except ConfigError as exc:
        key = f" [key: {exc.key}]" if exc.key else ""
        print(f"hyperdual: configuration error{key}: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"hyperdual: configuration error: file not found: {exc.filename}", file=sys.stderr)
        return 1
    except (TrainingError, NonFiniteError, DegenerateNeighborhoodError, DataFormatError,
            OSError, MemoryError) as exc:
        print(f"hyperdual: runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

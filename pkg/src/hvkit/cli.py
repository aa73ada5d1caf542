"""Command-line entry point: ``hvkit <command> [flags]``.

Exit codes: 0 on success, 2 for usage or input errors, 3 for runtime failures.
Every command echoes its fully resolved invocation to stderr so a run can be
replayed exactly.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import os
import shlex
import sys
import time
from pathlib import Path

import numpy as np

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_RUNTIME = 3

log = logging.getLogger("hvkit")


class InputError(Exception):
    """Bad user input; maps to exit code 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise InputError(f"{self.prog}: {message}")


# -- argument helpers ---------------------------------------------------------


def _floats(text: str) -> list[float]:
    try:
        vals = [float(t) for t in text.replace(";", ",").split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals or not all(math.isfinite(v) for v in vals):
        raise argparse.ArgumentTypeError(f"expected finite numbers, got {text!r}")
    return vals


def _positive(text: str) -> int:
    try:
        val = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if val < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {val}")
    return val


def _non_negative(text: str) -> int:
    try:
        val = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if val < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {val}")
    return val


def _seed(text: str) -> int:
    val = _non_negative(text)
    if val >= 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return val


def _positive_float(text: str) -> float:
    try:
        val = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not val > 0 or not math.isfinite(val):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return val


def _backends(text: str) -> list[str]:
    names = [t.strip() for t in text.split(",") if t.strip()]
    bad = [n for n in names if n not in ("exact", "mc", "deep")]
    if not names or bad:
        raise argparse.ArgumentTypeError(f"backends must be from exact,mc,deep; got {text!r}")
    return names


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("HVKIT_THREADS")
    if env:
        try:
            return _positive(env)
        except argparse.ArgumentTypeError as exc:
            raise InputError(f"HVKIT_THREADS: {exc}") from None
    return 1


def read_solution_csv(path) -> np.ndarray:
    """Parse a CSV of one solution per line into an ``(M, N)`` set.

    A first line that is not numeric is taken as a header.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from None
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if rows:
        try:
            [float(c) for c in rows[0]]
        except ValueError:
            rows = rows[1:]
    if not rows:
        raise InputError(f"{path}: no solutions found")
    width = len(rows[0])
    out = []
    for ln, row in enumerate(rows, 1):
        if len(row) != width:
            raise InputError(f"{path}: row {ln} has {len(row)} columns, expected {width}")
        try:
            vals = [float(c) for c in row]
        except ValueError:
            raise InputError(f"{path}: row {ln} is not numeric: {','.join(row)}") from None
        if not all(math.isfinite(v) for v in vals):
            raise InputError(f"{path}: row {ln} has non-finite values")
        out.append(vals)
    return np.asarray(out, dtype=np.float64).T


def _load_model(path):
    from hvkit import deephv

    if path is None:
        raise InputError("the deep backend needs --model")
    try:
        return deephv.load_weights(path)
    except OSError as exc:
        raise InputError(f"cannot read model {path}: {exc.strerror or exc}") from None
    except deephv.WeightFileError as exc:
        raise InputError(str(exc)) from None


def _read_dataset(path):
    from hvkit import training

    try:
        return training.read_dataset(path)
    except OSError as exc:
        raise InputError(str(exc)) from None
    except training.DatasetError as exc:
        raise InputError(str(exc)) from None


def _ref_for(values: np.ndarray, ref: list[float] | None) -> np.ndarray:
    if ref is None:
        return np.zeros(values.shape[0])
    if len(ref) != values.shape[0]:
        raise InputError(f"--ref has {len(ref)} entries but the set has M={values.shape[0]}")
    return np.asarray(ref)


# -- commands -----------------------------------------------------------------


def cmd_gen_data(args) -> int:
    from hvkit import training

    if not 2 <= args.M <= 10:
        raise InputError("--M must be in [2, 10]")
    t0 = time.perf_counter()
    ds = training.gen_dataset(args.M, args.count, args.seed, workers=_threads(args))
    training.write_dataset(ds, args.out, {"seed": args.seed})
    print(f"wrote {len(ds)} records (M={args.M}) to {args.out} in {time.perf_counter() - t0:.1f}s")
    return EXIT_OK


def cmd_train(args) -> int:
    from hvkit import deephv, training

    data = _read_dataset(args.data)
    cfg = training.TrainConfig(
        channels=args.channels, learning_rate=args.lr, batch_size=args.batch_size,
        epochs=args.epochs, seed=args.seed, compute_dtype=args.dtype, lr_schedule=args.lr_schedule,
    )
    if args.val is not None:
        train_set, val_set, test_set = data, _read_dataset(args.val), None
        if val_set.m_dim != train_set.m_dim:
            raise InputError("training and validation data differ in M")
    else:
        tr, va, te = training.split_indices(len(data), cfg.seed, cfg.split)
        train_set, val_set, test_set = data.subset(tr), data.subset(va), data.subset(te)
    init = _load_model(args.init) if args.init else None
    result = training.train(cfg, train_set, val_set, weights=init, metrics_path=args.metrics,
                            progress=args.verbose)
    deephv.save_weights(result.weights, args.out)
    best = result.history[result.best_epoch - 1]
    print(f"best epoch {result.best_epoch}: train_mape {best['train_mape']:.6f} val_mape {best['val_mape']:.6f}")
    if test_set is not None and len(test_set):
        print(f"test_mape {training.evaluate(result.weights, test_set):.6f}")
    print(f"saved weights to {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from hvkit import training

    weights = _load_model(args.model)
    data = _read_dataset(args.data)
    print(f"mape {training.evaluate(weights, data):.8g} over {len(data)} records")
    return EXIT_OK


def cmd_hv(args) -> int:
    from hvkit import deephv
    from hvkit.hypervolume import exact_hv, shift_and_clean
    from hvkit.montecarlo import McConfig, estimate_hv

    values = read_solution_csv(args.input)
    ref = _ref_for(values, args.ref)
    if args.backend == "exact":
        result = exact_hv(values, ref)
        meta = "backend=exact"
    elif args.backend == "mc":
        result = estimate_hv(values, ref, McConfig(args.mc_samples, args.seed))
        meta = f"backend=mc samples={args.mc_samples} seed={args.seed}"
    else:
        weights = _load_model(args.model)
        D = shift_and_clean(values, ref)
        result = deephv.forward(D, weights) if D.shape[1] else 0.0
        meta = f"backend=deep model={args.model} channels={weights.channels}"
    print(f"{result:.17g}")
    print(f"# M={values.shape[0]} N={values.shape[1]} {meta}", file=sys.stderr)
    return EXIT_OK


def _bench_sets(args):
    from hvkit import training

    if args.data:
        ds = _read_dataset(args.data)
        if ds.m_dim != args.M:
            raise InputError(f"{args.data} has M={ds.m_dim}, expected --M {args.M}")
        idx = np.random.default_rng(args.seed).choice(len(ds), size=min(args.sets, len(ds)), replace=False)
        return [ds.record(int(i)) for i in idx]
    child = np.random.SeedSequence(args.seed).spawn(args.sets)
    return [training.gen_solution_set(args.M, np.random.default_rng(s)) for s in child]


def time_backends(sets, backends, repeats, mc_samples, seed, weights):
    """Time each backend over all ``sets``; returns one summary row per backend."""
    from hvkit import deephv
    from hvkit.hypervolume import exact_hv
    from hvkit.montecarlo import McConfig, estimate_hv

    exact = np.array([exact_hv(r.values, method="sweep") for r in sets])

    def run(kind):
        if kind == "exact":
            return [exact_hv(r.values, method="sweep") for r in sets]
        if kind == "mc":
            return [estimate_hv(r.values, None, McConfig(mc_samples, seed + i)) for i, r in enumerate(sets)]
        return [deephv.forward(r.values, weights) for r in sets]

    rows = []
    for kind in backends:
        times = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            preds = np.asarray(run(kind))
            times.append(time.perf_counter() - t0)
        mape = float(np.mean(np.abs(preds - exact) / exact))
        stderr = float(np.std(times, ddof=1) / math.sqrt(repeats)) if repeats > 1 else 0.0
        rows.append({"backend": kind, "M": sets[0].m_dim, "mean_seconds": float(np.mean(times)),
                     "stderr_seconds": stderr, "mape_vs_exact": mape})
    return rows


def cmd_time_bench(args) -> int:
    from hvkit import deephv

    if not 2 <= args.M <= 10:
        raise InputError("--M must be in [2, 10]")
    weights = None
    if "deep" in args.backends:
        if args.model:
            weights = _load_model(args.model)
        else:
            weights = deephv.init_weights(args.channels, args.seed)
    sets = _bench_sets(args)
    rows = time_backends(sets, args.backends, args.repeats, args.mc_samples, args.seed, weights)
    fields = ["backend", "M", "mean_seconds", "stderr_seconds", "mape_vs_exact"]
    with _open_out(args.out) as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: (f"{v:.6g}" if isinstance(v, float) else v) for k, v in row.items()})
    return EXIT_OK


EVOLVE_FIELDS = ["algorithm", "backend", "problem", "M", "seed", "generation", "evaluations",
                 "exact_hv", "wall_seconds", "hv_2se"]


def cmd_evolve(args) -> int:
    from hvkit.moea import HvBackend, Problem, run_ea
    from hvkit.montecarlo import McConfig

    if args.algorithm == "nsga2" and args.backend != "exact":
        raise InputError("nsga2 does not use a hypervolume backend; drop --backend")
    try:
        problem = Problem(args.problem, args.M)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    if args.pop < 2:
        raise InputError("--pop must be at least 2")
    if args.backend == "deep":
        backend = HvBackend("deep", weights=_load_model(args.model))
    elif args.backend == "mc":
        backend = HvBackend("mc", mc=McConfig(args.mc_samples, args.seed))
    else:
        backend = HvBackend("exact")
    finals = []
    with _open_out(args.out) as fh:
        w = csv.DictWriter(fh, fieldnames=EVOLVE_FIELDS, lineterminator="\n")
        w.writeheader()
        for k in range(args.seeds):
            hist = run_ea(args.algorithm, problem, args.gens, args.pop, args.seed + k, backend)
            for row in hist.rows():
                row["exact_hv"] = f"{row['exact_hv']:.17g}"
                row["wall_seconds"] = "" if args.no_wall_time else f"{row['wall_seconds']:.4f}"
                row["hv_2se"] = ""
                w.writerow(row)
            finals.append(hist.exact_hv[-1])
        mean = float(np.mean(finals))
        two_se = 2.0 * float(np.std(finals, ddof=1)) / math.sqrt(len(finals)) if len(finals) > 1 else 0.0
        w.writerow({"algorithm": args.algorithm, "backend": hist.backend, "problem": problem.name,
                    "M": problem.m_dim, "seed": "all", "generation": "summary",
                    "evaluations": hist.evaluations[-1], "exact_hv": f"{mean:.17g}",
                    "wall_seconds": "", "hv_2se": f"{two_se:.17g}"})
    print(f"# mean final exact_hv {mean:.6g} (2se {two_se:.3g}) over {len(finals)} seeds", file=sys.stderr)
    return EXIT_OK


class _open_out:
    """Context manager yielding a text handle for a path, or stdout for ``-``."""

    def __init__(self, path):
        self.path = path
        self.fh = None

    def __enter__(self):
        if self.path in (None, "-"):
            return sys.stdout
        try:
            self.fh = open(self.path, "w", newline="")
        except OSError as exc:
            raise InputError(f"cannot write {self.path}: {exc.strerror or exc}") from None
        return self.fh

    def __exit__(self, *exc):
        if self.fh is not None:
            self.fh.close()
        return False


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hvkit", description=__doc__.splitlines()[0])
    p.add_argument("--threads", type=_positive, default=None,
                   help="worker cap (default: $HVKIT_THREADS or 1); never changes results")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-data", help="generate a training dataset")
    g.add_argument("--M", type=int, required=True)
    g.add_argument("--count", type=_positive, required=True)
    g.add_argument("--seed", type=_seed, required=True)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="train a DeepHV model")
    t.add_argument("--data", required=True, help="dataset (split 80/10/10 unless --val is given)")
    t.add_argument("--val", default=None, help="separate validation dataset")
    t.add_argument("--out", required=True, help="weights file to write")
    t.add_argument("--channels", type=_positive, default=64)
    t.add_argument("--lr", type=_positive_float, default=1e-5)
    t.add_argument("--batch-size", type=_positive, default=64)
    t.add_argument("--epochs", type=_positive, default=20)
    t.add_argument("--seed", type=_seed, default=0)
    t.add_argument("--dtype", choices=("float64", "float32"), default="float64")
    t.add_argument("--lr-schedule", choices=("constant", "cosine"), default="constant")
    t.add_argument("--init", default=None, help="weights file to start from")
    t.add_argument("--metrics", default=None, help="per-epoch metrics CSV")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="MAPE of a model on a dataset")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.set_defaults(func=cmd_eval)

    h = sub.add_parser("hv", help="hypervolume of a CSV solution set")
    h.add_argument("input", help="CSV, one solution per line, optional header")
    h.add_argument("--ref", type=_floats, default=None, help="reference point (default: origin)")
    h.add_argument("--backend", choices=("exact", "mc", "deep"), default="exact")
    h.add_argument("--model", default=None)
    h.add_argument("--mc-samples", type=_positive, default=10_000)
    h.add_argument("--seed", type=_seed, default=0)
    h.set_defaults(func=cmd_hv)

    b = sub.add_parser("time-bench", help="wall time and MAPE of each backend")
    b.add_argument("--M", type=int, required=True)
    b.add_argument("--sets", type=_positive, default=100)
    b.add_argument("--backends", type=_backends, default=["exact", "mc", "deep"])
    b.add_argument("--mc-samples", type=_positive, default=10_000)
    b.add_argument("--repeats", type=_positive, default=3)
    b.add_argument("--data", default=None, help="draw sets from this dataset instead of generating")
    b.add_argument("--model", default=None, help="weights for the deep backend (default: random)")
    b.add_argument("--channels", type=_positive, default=64, help="width of random weights")
    b.add_argument("--seed", type=_seed, default=0)
    b.add_argument("--out", default="-")
    b.set_defaults(func=cmd_time_bench)

    v = sub.add_parser("evolve", help="EA campaign over several seeds")
    v.add_argument("--algorithm", choices=("sms-emoa", "nsga2"), default="sms-emoa")
    v.add_argument("--backend", choices=("exact", "mc", "deep"), default="exact")
    v.add_argument("--problem", required=True)
    v.add_argument("--M", type=int, required=True)
    v.add_argument("--pop", type=int, default=100)
    v.add_argument("--gens", type=_non_negative, default=10)
    v.add_argument("--seeds", type=_positive, default=5)
    v.add_argument("--seed", type=_seed, default=0, help="first seed; runs use seed..seed+seeds-1")
    v.add_argument("--model", default=None)
    v.add_argument("--mc-samples", type=_positive, default=10_000)
    v.add_argument("--no-wall-time", action="store_true",
                   help="leave wall_seconds blank so reruns are byte-identical")
    v.add_argument("--out", default="-")
    v.set_defaults(func=cmd_evolve)
    return p


def invocation_line(parser: argparse.ArgumentParser, args: argparse.Namespace) -> str:
    """Reconstruct the command with every default spelled out."""
    parts = ["hvkit"]
    if args.threads is not None:
        parts += ["--threads", str(args.threads)]
    parts.append(args.command)
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for action in sub.choices[args.command]._actions:
        if action.dest in ("help", "func"):
            continue
        val = getattr(args, action.dest)
        if not action.option_strings:
            parts.append(str(val))
        elif isinstance(action, argparse._StoreTrueAction):
            if val:
                parts.append(action.option_strings[0])
        elif val is not None:
            if isinstance(val, list):
                val = ",".join(str(v) for v in val)
            parts += [action.option_strings[0], str(val)]
    return shlex.join(parts)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except InputError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    print(f"# {invocation_line(parser, args)}", file=sys.stderr)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"hvkit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KeyboardInterrupt:
        return EXIT_RUNTIME
    except Exception as exc:
        print(f"hvkit: runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

"""``phaselearn`` command line.

Exit codes: 0 success, 1 runtime or data failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from phaselearn.errors import RecordError, SizeError

log = logging.getLogger("phaselearn")

MAX_FAILURE_RATE = 0.2


class CliError(Exception):
    """Runtime or data failure reported with exit code 1."""


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 1 << 64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _window(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"window must look like lo,hi, got {text!r}") from None
    if not lo < hi:
        raise argparse.ArgumentTypeError(f"window needs lo < hi, got {text!r}")
    return lo, hi


def _thread_list(text: str) -> list[int]:
    try:
        out = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"threads must be a comma-separated list of integers, got {text!r}") from None
    if not out or min(out) < 1:
        raise argparse.ArgumentTypeError(f"thread counts must be >= 1, got {text!r}")
    return out


def _on_off(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError(f"expected on or off, got {text!r}")
    return text == "on"


def _common(p: argparse.ArgumentParser, *, threads_list: bool = False) -> None:
    p.add_argument("--seed", type=_u64, default=0, help="base random seed (unsigned 64-bit)")
    if threads_list:
        p.add_argument("--threads", type=_thread_list, default=[1, 2, 4],
                       help="comma-separated thread counts; must include 1")
    else:
        p.add_argument("--threads", type=_positive_int, default=None,
                       help="worker threads (default: $PHASELEARN_THREADS or 1)")
    p.add_argument("--out", type=Path, default=None, help="output path")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phaselearn", description="Learn quantum phases from VQE ground states.")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="run a VQE sweep and write a JSONL dataset plus manifest")
    g.add_argument("--model", type=str.upper, choices=["TFIM", "XXZ"], required=True, help="tfim or xxz")
    g.add_argument("--n", type=int, default=8, help="number of spins")
    g.add_argument("--count", type=int, required=True, help="grid points (>= 2)")
    g.add_argument("--depth", type=_positive_int, default=4, help="checkerboard layers")
    g.add_argument("--window", type=_window, default=None, help="coupling window lo,hi (default per model)")
    g.add_argument("--lr", type=float, default=0.05, help="Adam learning rate")
    g.add_argument("--max-iters", type=_positive_int, default=500, help="VQE iteration cap")
    _common(g)
    g.set_defaults(func=cmd_generate, subparser=g)

    t = sub.add_parser("train", help="train the hybrid classifier on a dataset")
    t.add_argument("--data", type=Path, required=True, help="JSONL dataset")
    t.add_argument("--epochs", type=_positive_int, default=100)
    t.add_argument("--augment", type=_on_off, default=False, help="on|off: augment the training split")
    t.add_argument("--batch-size", type=_positive_int, default=16)
    t.add_argument("--lr", type=float, default=1e-3)
    t.add_argument("--hidden", type=_positive_int, default=16, help="width of the first dense layer")
    t.add_argument("--extra-stacks", type=int, default=0, help="additional dense+quantum stacks")
    t.add_argument("--probabilities", action="store_true", help="use basis probabilities as features")
    _common(t)
    t.set_defaults(func=cmd_train, subparser=t)

    e = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    e.add_argument("--model-file", type=Path, required=True, help="checkpoint JSON")
    e.add_argument("--data", type=Path, required=True, help="JSONL dataset")
    e.add_argument("--curve", action="store_true", help="write the (coupling, probability) curve CSV")
    _common(e)
    e.set_defaults(func=cmd_eval, subparser=e)

    x = sub.add_parser("exact", help="print the exact ground-state energy")
    x.add_argument("--model", type=str.upper, choices=["TFIM", "XXZ"], default="TFIM")
    x.add_argument("--n", type=int, required=True)
    x.add_argument("--coupling", type=float, default=1.0, help="h for TFIM, Jz for XXZ")
    _common(x)
    x.set_defaults(func=cmd_exact, subparser=x)

    b = sub.add_parser("bench", help="thread-scaling benchmarks")
    b.add_argument("--workload", choices=["vqe", "qcnn", "all"], default="all")
    b.add_argument("--n-qubits", type=int, default=16)
    b.add_argument("--iters", type=_positive_int, default=20)
    b.add_argument("--depth", type=_positive_int, default=1)
    b.add_argument("--dataset-size", type=_positive_int, default=200)
    b.add_argument("--epochs", type=_positive_int, default=5)
    b.add_argument("--repeats", type=_positive_int, default=5)
    _common(b, threads_list=True)
    b.set_defaults(func=cmd_bench, subparser=b)
    return parser


def _write_or_print(text: str, path: Path | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")


def _load_records(path: Path):
    from phaselearn.dataset import read_jsonl

    if not path.is_file():
        raise CliError(f"dataset not found: {path}")
    try:
        records = read_jsonl(path)
    except RecordError as exc:
        raise CliError(f"cannot parse dataset {exc}") from exc
    if not records:
        raise CliError(f"dataset {path} has no records")
    return records


def cmd_generate(args, parser) -> int:
    from phaselearn.dataset import generate_dataset
    from phaselearn.vqe import OptimizerConfig

    if args.count < 2:
        parser.error(f"--count must be >= 2, got {args.count}")
    if args.n < 2:
        parser.error(f"--n must be >= 2, got {args.n}")
    out = args.out or Path(f"{args.model.lower()}_n{args.n}_c{args.count}.jsonl")
    out.parent.mkdir(parents=True, exist_ok=True)
    cfg = OptimizerConfig(learning_rate=args.lr, max_iters=args.max_iters, seed=args.seed)

    def progress(entry):
        log.info("coupling %.6f: %s", entry.coupling,
                 f"E={entry.result.final_energy:.8f}" if entry.ok else f"failed ({entry.error})")

    summary = generate_dataset(args.model, args.n, args.count, args.depth, args.seed, out, window=args.window,
                               config=cfg, on_record=progress)
    n0, n1 = summary.label_counts
    print(f"wrote {summary.n_records} records to {summary.path}")
    print(f"converged {summary.n_converged}/{summary.n_records}; labels 0:{n0} 1:{n1}")
    print(f"manifest {summary.manifest}")
    if summary.failure_rate > MAX_FAILURE_RATE:
        raise CliError(f"VQE failure rate {summary.failure_rate:.1%} exceeds {MAX_FAILURE_RATE:.0%}; "
                       f"see {summary.manifest}")
    return 0


def cmd_train(args, parser) -> int:
    from phaselearn.qcnn import TrainConfig, metrics_csv, save_checkpoint, train

    records = _load_records(args.data)
    if len({r.label for r in records}) < 2:
        raise CliError(f"dataset {args.data} contains a single class")
    feature_models = {(r.model, r.n_qubits) for r in records}
    if len(feature_models) != 1:
        raise CliError(f"dataset mixes models or sizes: {sorted(feature_models)}")
    cfg = TrainConfig(epochs=args.epochs, learning_rate=args.lr, batch_size=args.batch_size, seed=args.seed,
                      hidden=args.hidden, extra_stacks=args.extra_stacks, augment=args.augment,
                      probabilities=args.probabilities)
    model, report = train(records, cfg)
    out = args.out or Path("run")
    out.mkdir(parents=True, exist_ok=True)
    (model_name, n), = feature_models
    meta = {"model": model_name, "n": n, "probabilities": args.probabilities, "seed": args.seed}
    save_checkpoint(model, out / "checkpoint.json", meta=meta)
    (out / "metrics.csv").write_text(metrics_csv(report), encoding="utf-8")
    doc = {"data": str(args.data), "augment": args.augment, **report.to_json()}
    (out / "report.json").write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    print(f"test accuracy {report.test_accuracy:.4f} on {report.test_size} records "
          f"(train {report.train_size}, raw {report.raw_train_size})")
    print(f"wrote {out / 'checkpoint.json'}, {out / 'metrics.csv'}, {out / 'report.json'}")
    return 0


def cmd_eval(args, parser) -> int:
    from phaselearn.dataset import record_features, record_labels
    from phaselearn.qcnn import crossing_point, curve_csv, evaluate, load_checkpoint, phase_curve

    if not args.model_file.is_file():
        raise CliError(f"checkpoint not found: {args.model_file}")
    try:
        model, meta = load_checkpoint(args.model_file)
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot load checkpoint {args.model_file}: {exc}") from exc
    records = _load_records(args.data)
    X = record_features(records, probabilities=bool(meta.get("probabilities", False)))
    if X.shape[1] != model.feature_length:
        raise CliError(f"feature length mismatch: checkpoint expects {model.feature_length}, data gives {X.shape[1]}")
    res = evaluate(model, X, record_labels(records))
    print(f"accuracy {res.accuracy:.4f} on {len(records)} records; confusion {res.confusion}")
    if args.curve:
        curve = phase_curve([r.coupling for r in records], res.probabilities)
        _write_or_print(curve_csv(curve), args.out)
        c = crossing_point(curve)
        print("crossing none" if c is None else f"crossing {c:.6f}", file=sys.stderr if args.out is None else sys.stdout)
    return 0


def cmd_exact(args, parser) -> int:
    from phaselearn.hamiltonian import MAX_EXACT_QUBITS, build_model, exact_ground

    if args.n > MAX_EXACT_QUBITS:
        raise CliError(f"exact diagonalisation supports at most {MAX_EXACT_QUBITS} spins, got {args.n}")
    try:
        e, _ = exact_ground(build_model(args.model, args.n, args.coupling))
    except (SizeError, ValueError) as exc:
        raise CliError(str(exc)) from exc
    _write_or_print(f"{e:.12f}\n", args.out)
    return 0


def cmd_bench(args, parser) -> int:
    from phaselearn.bench import run_benchmarks, speedup_report

    if 1 not in args.threads:
        parser.error("--threads must include 1 (the speedup baseline)")
    results = run_benchmarks(args.workload, args.threads, n_qubits=args.n_qubits, iters=args.iters, depth=args.depth,
                             dataset_size=args.dataset_size, epochs=args.epochs, repeats=args.repeats, seed=args.seed)
    header = {
        "vqe_workload": f"TFIM n={args.n_qubits} h=1 depth={args.depth} iters={args.iters}",
        "qcnn_workload": f"dataset={args.dataset_size} epochs={args.epochs}",
        "timing": f"median of {args.repeats} after 1 warm-up",
    }
    _write_or_print(speedup_report(results, header=header), args.out)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.command != "bench" and args.threads is not None:
        from phaselearn.parallel import set_num_threads

        set_num_threads(args.threads)
    try:
        return args.func(args, args.subparser)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

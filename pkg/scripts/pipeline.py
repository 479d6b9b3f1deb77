"""Generate, train and evaluate one model end to end through the CLI.

    python3 scripts/pipeline.py tfim            # 100 records
    python3 scripts/pipeline.py xxz --count 1000
    python3 scripts/pipeline.py xxz --augment   # augment the training split

Everything lands in ``runs/<model>/``: dataset + manifest, checkpoint,
metrics, report and the phase curve.
"""

import argparse
import sys
import time
from pathlib import Path

from phaselearn.cli import main as cli

DEFAULT_COUNT = {"tfim": 100, "xxz": 1000}


def step(name, argv):
    t0 = time.perf_counter()
    code = cli([str(a) for a in argv])
    print(f"[{name}] exit {code} in {time.perf_counter() - t0:.1f} s", flush=True)
    if code:
        sys.exit(code)


def run(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("model", choices=["tfim", "xxz"])
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--depth", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--augment", action="store_true")
    p.add_argument("--root", type=Path, default=Path("runs"))
    args = p.parse_args(argv)

    out = args.root / args.model
    data = out / f"{args.model}.jsonl"
    count = args.count or DEFAULT_COUNT[args.model]
    common = ["--seed", args.seed, "--threads", args.threads]
    if not data.exists():
        step("generate", ["generate", "--model", args.model, "--n", args.n, "--count", count, "--depth", args.depth,
                          "--out", data, "-v", *common])
    step("train", ["train", "--data", data, "--augment", "on" if args.augment else "off", "--out", out, *common])
    step("eval", ["eval", "--model-file", out / "checkpoint.json", "--data", data, "--curve",
                  "--out", out / "curve.csv", *common])


if __name__ == "__main__":
    run()

"""Thread-scaling benchmark, written to ``runs/bench.csv``.

    python3 scripts/scaling.py                  # threads 1,2,4, full workloads
    python3 scripts/scaling.py --quick          # tiny workloads, smoke test
"""

import argparse
import sys
from pathlib import Path

from phaselearn.cli import main as cli


def run(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--threads", default="1,2,4")
    p.add_argument("--out", type=Path, default=Path("runs/bench.csv"))
    p.add_argument("--quick", action="store_true")
    args = p.parse_args(argv)
    extra = ["--n-qubits", "10", "--iters", "2", "--dataset-size", "20", "--epochs", "1", "--repeats", "1"] \
        if args.quick else []
    code = cli(["bench", "--threads", args.threads, "--out", str(args.out), *extra])
    if code == 0:
        print(args.out.read_text(), end="")
    sys.exit(code)


if __name__ == "__main__":
    run()

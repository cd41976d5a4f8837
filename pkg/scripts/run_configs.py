"""Run every JSON config in scripts/configs through the CLI.

Each run writes report.json, trials.csv and plot CSVs to <out>/<config name>/.

    python scripts/run_configs.py [--out results] [--workers 4] [name ...]
"""

import argparse
import glob
import os
import sys

from levysv import cli

HERE = os.path.dirname(os.path.abspath(__file__))


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="results")
    ap.add_argument("--workers", type=int)
    ap.add_argument("names", nargs="*")
    args = ap.parse_args(argv)
    codes = {}
    for path in sorted(glob.glob(os.path.join(HERE, "configs", "*.json"))):
        name = os.path.splitext(os.path.basename(path))[0]
        if args.names and name not in args.names:
            continue
        kind = name.split("_")[0]
        cmd = [kind, "--config", path, "--out", os.path.join(args.out, name)]
        if args.workers:
            cmd += ["--workers", str(args.workers)]
        print(f"== {name}", flush=True)
        codes[name] = cli.main(cmd)
    bad = {k: v for k, v in codes.items() if v}
    if bad:
        print(f"non-zero exit codes: {bad}", file=sys.stderr)
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())

"""Run every experiment through the command line and collect CSVs in results/.

    python3 scripts/run_experiments.py [--only fig2,table1] [--out results]

Each run is one ``fracprop`` invocation; a nonzero exit stops the batch.
"""
import argparse
import subprocess
import sys
import time
from pathlib import Path

HERE = Path(__file__).resolve().parent
CONFIGS = HERE / "configs"

# (name, subcommand, config file, extra flags)
RUNS = [
    ("fig2", "converge", "fig2_homogeneous.cfg", []),
    ("fig3a", "converge", "fig3a_inhomogeneous.cfg", []),
    ("fig3b_m10", "converge", "fig3b_full.cfg", ["--m", "10"]),
    ("fig3b_m100", "converge", "fig3b_full.cfg", ["--m", "100"]),
    ("fig3b_m1000", "converge", "fig3b_full.cfg", ["--m", "1000"]),
    ("table1", "table1", "table1.cfg", []),
    ("inverse", "inverse", "inverse.cfg", []),
]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--only", default="", help="comma-separated run names")
    parser.add_argument("--out", default="results", type=Path)
    args = parser.parse_args()
    wanted = {n for n in args.only.split(",") if n}
    args.out.mkdir(parents=True, exist_ok=True)
    for name, command, config, extra in RUNS:
        if wanted and name not in wanted:
            continue
        target = args.out / f"{name}.csv"
        cmd = [sys.executable, "-m", "fracprop.cli", command, "--config", str(CONFIGS / config), *extra]
        cmd += ["--output", str(target)]
        print(f"> {name}: {' '.join(cmd[2:])}", flush=True)
        start = time.perf_counter()
        code = subprocess.run(cmd, check=False).returncode
        print(f"  exit {code} after {time.perf_counter() - start:.1f} s -> {target}", flush=True)
        if code:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(main())

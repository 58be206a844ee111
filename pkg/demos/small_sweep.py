"""
A verdict map over mass and diffusivity ratio, at toy resolution.

Builds a 3 x 3 sweep in memory (the shipped `epsilon-sweep` preset is the
full-size version), runs it, then runs it again with resume to show that
finished cells are skipped.  The verdict heatmap lands next to the
summary CSV.

    python demos/small_sweep.py --out /tmp/sweep-demo
"""

import argparse
import math
import time

from pksns.config import parse_config
from pksns.plots import plot_sweep
from pksns.runner import run_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[1])
    ap.add_argument("--out", default="runs/small-sweep")
    ap.add_argument("-j", "--parallelism", type=int, default=1)
    args = ap.parse_args()

    raw = {
        "name": "small-sweep",
        "paper": {"nu": 1.0, "epsilon": 1.0, "M": 5.0},
        "grid": {"Nx": 32, "Ny": 256, "Ly": 8 * math.pi},
        "initial": {"sigma": 0.5},
        "switches": {"couette": True},
        "run": {"t_max": 1.0, "out_interval": 0.25, "output_dir": args.out},
        "sweep": {"axes": {"epsilon": [1.0, 0.3, 0.1], "M": [5.0, 20.0, 60.0]},
                  "parallelism": args.parallelism},
    }
    sweep = parse_config(raw)
    t0 = time.perf_counter()
    path = run_sweep(sweep, force=True)
    print(f"{sweep.size} cells in {time.perf_counter() - t0:.1f}s")
    print(path.read_text())
    t0 = time.perf_counter()
    run_sweep(sweep, resume=True)
    print(f"resume with nothing left to do: {time.perf_counter() - t0:.2f}s")
    print("heatmap:", plot_sweep(path, path.parent))


if __name__ == "__main__":
    main()

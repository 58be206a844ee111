"""
Bisect the smallest blob mass that collapses before t = 1 without shear.

Runs the `blowup-noshear` preset with kappa = nu = 1 at different masses and
halves the bracket [lo, hi] until it is narrower than --tol.  The printed
threshold is grid dependent; the preset pins a mass comfortably above it.

    python demos/find_blowup_mass.py --lo 25 --hi 45
"""

import argparse
from dataclasses import replace

from pksns.config import load_config
from pksns.dynamics import run


def collapses(base, mass: float) -> tuple[bool, float]:
    blobs = tuple(replace(b, mass=mass) for b in base.blobs)
    cfg = replace(base, blobs=blobs, params=replace(base.params, M=mass))
    report = run(cfg)
    return report.verdict.status == "blowup", report.verdict.t_stop


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[1])
    ap.add_argument("--preset", default="blowup-noshear")
    ap.add_argument("--lo", type=float, default=25.0)
    ap.add_argument("--hi", type=float, default=45.0)
    ap.add_argument("--tol", type=float, default=1.0)
    args = ap.parse_args()

    base = load_config(args.preset)
    lo, hi = args.lo, args.hi
    for m in (lo, hi):
        print(f"M = {m:8.3f}: blowup={collapses(base, m)}", flush=True)
    while hi - lo > args.tol:
        mid = 0.5 * (lo + hi)
        hit, t = collapses(base, mid)
        print(f"M = {mid:8.3f}: blowup={hit} t_stop={t:.4f}", flush=True)
        lo, hi = (lo, mid) if hit else (mid, hi)
    print(f"threshold mass in [{lo:.3f}, {hi:.3f}]")


if __name__ == "__main__":
    main()

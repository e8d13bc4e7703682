"""Refinement tables for the layer-potential reduction and the flux identity.

    python scripts/convergence_study.py [--levels 3]

Prints the relative layer gap on successive (grid, panel) levels for
gamma0 in {0, 1}, then the flux-identity residual of each smooth fixture on
successive grid refinements, with observed ratios.
"""

import argparse

from grooving import experiments as ex


def main() -> None:
    ap = argparse.ArgumentParser(description="refinement tables")
    ap.add_argument("--levels", type=int, default=3, help="number of refinement levels")
    args = ap.parse_args()
    levels = [(512 * 2**k + 1, 8 * 2**k) for k in range(args.levels)]
    print("layer reduction gap (h = 1, t = 1, x <= 12)")
    for g0 in (0.0, 1.0):
        prev = None
        for n, ppd in levels:
            gap = ex.layer_gap(g0, n, ppd)
            ratio = "" if prev is None else f"ratio {prev / gap:.2f}"
            print(f"  gamma0={g0:g} n={n:5d} ppd={ppd:3d} gap={gap:.3e} {ratio}")
            prev = gap
    print("flux identity residual (interior sup)")
    refs = tuple(2**k for k in range(args.levels))
    for name, grid_fn, height, bg, g0 in ex.flux_fixtures():
        vals = ex.flux_identity_levels(grid_fn, height, bg, g0, refinements=refs)
        ratios = " ".join(f"{a / b:.2f}" for a, b in zip(vals[:-1], vals[1:]))
        print(f"  {name:12s} " + " ".join(f"{v:.3e}" for v in vals) + f"  ratios {ratios}")


if __name__ == "__main__":
    main()

"""Slope studies: operator expansions, Hadamard quotients and moment errors."""

import argparse
import sys

import numpy as np

from shapefsi.moments import DEFAULT_EPS, DEFAULT_FLUID_POINTS, DEFAULT_SOLID_POINTS, convergence_study
from shapefsi.reporting import emit_plot_data, plot_csv
from shapefsi.verify import hadamard_suite


def show(rep):
    pw = " ".join(f"{s:.3f}" for s in rep.pairwise)
    print(f"{'PASS' if rep.passed else 'FAIL'}  {rep.id:48s} slope={rep.slope:.3f} (target {rep.target_slope}) pairwise [{pw}]")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eps", default=",".join(map(str, DEFAULT_EPS)))
    ap.add_argument("--plot-dir", help="write plot-ready CSV tables here")
    args = ap.parse_args(argv)
    eps = [float(e) for e in args.eps.split(",")]

    reports = [h.report for h in hadamard_suite()]
    for x in DEFAULT_FLUID_POINTS:
        reports.append(convergence_study(x, eps, "mean"))
        reports.append(convergence_study(x, eps, "variance"))
    for x in DEFAULT_SOLID_POINTS:
        reports.append(convergence_study(x, eps, "variance", "u"))
    reports.append(convergence_study(None, eps, "taylor-remainder"))
    for r in reports:
        show(r)
        if args.plot_dir:
            from pathlib import Path

            out = Path(args.plot_dir)
            out.mkdir(parents=True, exist_ok=True)
            name = "".join(c if c.isalnum() else "_" for c in r.id)
            (out / f"{name}.csv").write_text(plot_csv(emit_plot_data(r)), newline="")
    return 0 if all(r.passed for r in reports) else 1


if __name__ == "__main__":
    sys.exit(main())

"""Monte Carlo moments of the perturbed pressure against the quadrature oracle."""

import argparse
import sys
import time

from shapefsi.moments import DEFAULT_EPS, DEFAULT_FLUID_POINTS, moment_monte_carlo, moment_oracle


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--samples", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=12345)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args(argv)

    t0 = time.perf_counter()
    worst = 0.0
    print(f"{'point':>14s} {'eps':>6s} {'oracle mean':>13s} {'mc mean':>13s} {'z':>6s} {'oracle var':>12s} {'mc var':>12s} {'z':>6s}")
    for x in DEFAULT_FLUID_POINTS:
        for e in DEFAULT_EPS:
            orc = moment_oracle(x, e)
            mc = moment_monte_carlo(x, e, args.samples, args.seed, workers=args.workers)
            zm = float((mc.mean - orc.mean) / mc.mean_stderr)
            zv = float((mc.variance - orc.variance) / mc.variance_stderr)
            worst = max(worst, abs(zm), abs(zv))
            print(
                f"{str(x):>14s} {e:6.3f} {float(orc.mean):13.9f} {float(mc.mean):13.9f} {zm:6.2f}"
                f" {float(orc.variance):12.4e} {float(mc.variance):12.4e} {zv:6.2f}"
            )
    print(f"max |z| = {worst:.3f}  ({time.perf_counter() - t0:.2f} s)")
    return 0 if worst <= 3.0 else 1


if __name__ == "__main__":
    sys.exit(main())

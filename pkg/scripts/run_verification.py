"""Residual checks of the first- and second-order shape sensitivity identities.

Prints one line per report; exit status 1 if any report fails.
"""

import argparse
import sys

from shapefsi.example import ExampleParams, PerturbationSample
from shapefsi.verify import (
    verify_constitutive,
    verify_G_field,
    verify_printed_H,
    verify_shape_derivative_boundary,
    verify_shape_derivative_interior,
    verify_shape_hessian,
)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--a", type=float, default=1.0)
    ap.add_argument("--b", type=float, default=1.0)
    ap.add_argument("--nodes", type=int, default=64, help="Gauss nodes per boundary side")
    args = ap.parse_args(argv)

    P = ExampleParams()
    s = PerturbationSample(0.0, args.a, args.b)
    reports = verify_constitutive(P, s)
    reports += list(verify_shape_derivative_interior(P, s))
    reports += list(verify_shape_derivative_interior(P, s, solid_coeff=P.mu2))
    reports += verify_shape_derivative_boundary(P, s, args.nodes)
    reports += verify_G_field(P, s, args.nodes)
    reports += verify_shape_hessian(P, s, args.nodes)
    reports += verify_printed_H(P, s, args.nodes)
    for r in reports:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.id:45s} max={r.norm_max:.3e} rms={r.norm_rms:.3e}")
    return 0 if all(r.passed for r in reports) else 1


if __name__ == "__main__":
    sys.exit(main())

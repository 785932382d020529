"""One test per acceptance criterion, each printing a PASS/FAIL line."""

import time

import numpy as np
import pytest

from conftest import record
from shapefsi.cli import ExperimentConfig, amplitude_checks, run
from shapefsi.convergence import fit_slope
from shapefsi.example import ExampleParams, PerturbationSample, exact_fields
from shapefsi.fields import VectorField
from shapefsi.moments import (
    DEFAULT_EPS,
    DEFAULT_FLUID_POINTS,
    DEFAULT_SOLID_POINTS,
    convergence_study,
    moment_monte_carlo,
    moment_oracle,
)
from shapefsi.tensor import L_from_partials
from shapefsi.transport import dilation_map, field_map, jacobian_bundle
from shapefsi.verify import (
    hadamard_suite,
    interior_points,
    verify_constitutive,
    verify_shape_derivative_boundary,
    verify_shape_derivative_interior,
    verify_shape_hessian,
)

OPERATOR_EPS = np.array([1e-2, 1e-3, 1e-4, 1e-5])


def random_solid_points(n, seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-2, 2, (8 * n, 2))
    return x[np.max(np.abs(x), axis=1) > 1][:n]


def cubic_field(c):
    """``V_i = sum_k c_ik x_k + c_i3 x_0 x_1 x_2 + c_i4 x_i^2`` in 3-D."""
    c = np.asarray(c).reshape(3, 5)

    def value(p):
        lin = p @ c[:, :3].T
        return lin + np.outer(p.prod(axis=1), c[:, 3]) + c[:, 4] * p**2

    def grad(p):
        g = np.broadcast_to(c[:, :3], (len(p), 3, 3)).copy()
        prod = np.stack([p[:, 1] * p[:, 2], p[:, 0] * p[:, 2], p[:, 0] * p[:, 1]], -1)
        g += c[None, :, 3, None] * prod[:, None, :]
        g += np.einsum("i,ni,ij->nij", 2 * c[:, 4], p, np.eye(3))
        return g

    return VectorField(value, 3, grad)


def test_criterion_01_constitutive_closure():
    t0 = time.perf_counter()
    rep = verify_constitutive(points=random_solid_points(100, 1))[0]
    dt = time.perf_counter() - t0
    ok = rep.n_points == 100 and rep.norm_max <= 1e-12 and dt < 1.0
    assert record(1, ok, f"max |C E(u) - sigma| = {rep.norm_max:.3g}, {dt:.3f} s")


def test_criterion_02_interior_shape_derivative():
    t0 = time.perf_counter()
    solid, fluid = verify_shape_derivative_interior(
        solid_points=interior_points("solid", 200), fluid_points=interior_points("fluid", 200), tol=1e-8
    )
    dt = time.perf_counter() - t0
    ok = solid.passed and fluid.passed and dt < 1.0
    msg = f"solid {solid.norm_max:.3g}, fluid {fluid.norm_max:.3g}, {dt:.3f} s"
    assert record(2, ok, msg)


def test_criterion_03_boundary_shape_derivative():
    reps = [r for r in verify_shape_derivative_boundary(npts=64, tol=1e-8) if "/bc-printed/" in r.id]
    assert len(reps) == 8
    worst = max(reps, key=lambda r: r.norm_max)
    failing = [r.id.rsplit("/", 1)[1] for r in reps if not r.passed]
    ok = not failing
    assert record(3, ok, f"max residual {worst.norm_max:.3g} on {worst.id}; failing sides {failing}")


def test_criterion_04_shape_hessian():
    reps = [r for r in verify_shape_hessian(npts=64, tol=1e-8) if "/bc-exact/" not in r.id]
    worst = max(reps, key=lambda r: r.norm_max)
    failing = [r.id for r in reps if not r.passed]
    assert record(4, not failing, f"max residual {worst.norm_max:.3g} on {worst.id}; failing {failing}")


def test_criterion_05_determinant_and_adjugate_expansion():
    rng = np.random.default_rng(5)
    det_err = adj_err = 0.0
    for _ in range(100):
        V = cubic_field(rng.uniform(-0.5, 0.5, 15))
        x = rng.uniform(-1, 1, 3)
        eps = rng.uniform(0, 0.25)
        b = jacobian_bundle(field_map(V, eps), x)
        det_err = max(det_err, abs(np.linalg.det(b.J) - b.gamma_poly()))
        adj_err = max(adj_err, np.abs(b.J @ b.adjugate - np.linalg.det(b.J) * np.eye(3)).max())
    ok = det_err <= 1e-12 and adj_err <= 1e-12
    assert record(5, ok, f"det {det_err:.3g}, adjugate {adj_err:.3g}")


def test_criterion_06_first_order_operator_convergence():
    _, _, sigma = exact_fields()
    x = random_solid_points(20, 6)
    ds = sigma.grad(x)
    ref = L_from_partials(np.eye(2), ds)
    slopes = []
    for m in (dilation_map(1.0), dilation_map(-0.7)):
        e_L, e_J = [], []
        for e in OPERATOR_EPS:
            Jinv = np.linalg.inv(m.with_eps(e).jacobian(x))
            e_L.append(np.linalg.norm(L_from_partials(Jinv, ds) - ref))
            e_J.append(np.linalg.norm(np.swapaxes(Jinv, -1, -2) - np.eye(2)))
        slopes += [fit_slope(OPERATOR_EPS, e_L)[0], fit_slope(OPERATOR_EPS, e_J)[0]]
    ok = min(slopes) >= 0.95
    assert record(6, ok, f"slopes {np.round(slopes, 4).tolist()}")


def test_criterion_07_hadamard_formulas():
    t0 = time.perf_counter()
    res = hadamard_suite()
    dt = time.perf_counter() - t0
    main = [r.report for r in res if r.report.id.endswith("exponential")]
    kinds = {(r.id.split("/")[1], r.id.split("/")[3]) for r in main}
    ok = (
        kinds == {("volume", "translation"), ("volume", "dilation"), ("boundary", "translation"), ("boundary", "dilation")}
        and all(r.slope >= 0.9 for r in main)
        and all(r.report.passed for r in res)
        and dt < 10.0
    )
    assert record(7, ok, f"slopes {[round(r.slope, 3) for r in main]}, {dt:.2f} s")


def test_criterion_08_mean_convergence():
    reps = [convergence_study(x, DEFAULT_EPS, "mean") for x in DEFAULT_FLUID_POINTS]
    ok = all(r.passed and r.slope >= 1.9 for r in reps)
    assert record(8, ok, f"slopes {[round(r.slope, 3) for r in reps]}")


def test_criterion_09_variance_convergence():
    reps = [convergence_study(x, DEFAULT_EPS, "variance") for x in DEFAULT_FLUID_POINTS]
    reps += [convergence_study(x, DEFAULT_EPS, "variance", "u") for x in DEFAULT_SOLID_POINTS]
    ok = all(r.passed and r.slope >= 2.7 for r in reps)
    assert record(9, ok, f"min slope {min(r.slope for r in reps):.3f} over {len(reps)} points")


def test_criterion_10_taylor_remainder():
    rep = convergence_study(None, DEFAULT_EPS, "taylor-remainder", n_pairs=50)
    ok = rep.slope >= 2.9
    assert record(10, ok, f"slope {rep.slope:.3f}, pairwise {np.round(rep.pairwise, 3).tolist()}")


def test_criterion_11_monte_carlo_consistency():
    t0 = time.perf_counter()
    worst = 0.0
    pairs = [(x, e) for x in DEFAULT_FLUID_POINTS for e in DEFAULT_EPS]
    assert len(pairs) == 20
    for i, (x, e) in enumerate(pairs):
        mc = moment_monte_carlo(x, e, 100_000, seed=1000 + i)
        orc = moment_oracle(x, e)
        zm = abs(float(mc.mean - orc.mean)) / float(mc.mean_stderr)
        zv = abs(float(mc.variance - orc.variance)) / float(mc.variance_stderr)
        worst = max(worst, zm, zv)
    dt = time.perf_counter() - t0
    ok = worst <= 3.0 and dt < 60.0
    assert record(11, ok, f"max |z| = {worst:.3f}, {dt:.2f} s")


def test_criterion_12_amplitude_moments():
    quad, mc = amplitude_checks(100_000, seed=12345)
    ok = quad.passed and mc.passed
    v = mc.values
    msg = f"quadrature {quad.values}, MC E[a]={v['E[a]']:.4g}+-{v['E[a]_stderr']:.2g} E[a^2]={v['E[a^2]']:.6g}"
    assert record(12, ok, msg)


def test_criterion_13_determinism(tmp_path):
    def files(d):
        return {p.name: p.read_bytes() for p in sorted(d.iterdir())}

    import shutil

    base = ExperimentConfig(command="all", n_samples=100_000, seed=2024, out=str(tmp_path / "run"))
    outs = []
    for workers in (1, 1, 4):
        shutil.rmtree(base.out, ignore_errors=True)
        with open(tmp_path / "log.txt", "w") as log:
            run(ExperimentConfig(**{**base.__dict__, "workers": workers}), log)
        outs.append(files(tmp_path / "run"))
    same_serial = outs[0] == outs[1]
    reports = lambda f: {k: v for k, v in f.items() if k != "config.txt"}
    # config.txt records the worker count itself; every report file must match
    same_parallel = reports(outs[0]) == reports(outs[2])
    ok = same_serial and same_parallel and len(outs[0]) > 5
    assert record(13, ok, f"{len(outs[0])} files; serial rerun identical={same_serial}, 4 workers identical={same_parallel}")

"""Command-line driver: ``shapefsi <command> [options]``.

Commands run one study each (``all`` runs every study) and write one report
file per study, a summary table and plot-ready CSV files into ``--out``.

Exit status: 0 every check passed, 1 some check failed, 2 invalid
configuration, 3 numerical failure (degenerate transport Jacobian).
"""

from __future__ import annotations

import argparse
import hashlib
import sys
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .convergence import ConvergenceReport
from .example import ExampleParams, PerturbationSample
from .forms import FormContext
from .geometry import points_for_degree
from .moments import (
    DEFAULT_FLUID_POINTS,
    AmplitudeDistribution,
    convergence_study,
    moment_monte_carlo,
    moment_oracle,
    taylor_moment_approximation,
    DEFAULT_SOLID_POINTS,
)
from .reporting import (
    CheckRecord,
    StudyResult,
    emit_plot_data,
    plot_csv,
    render_study,
    summary_rows,
    to_csv,
    to_json,
)
from .transport import DegenerateJacobianError, EPS_MAX
from .verify import (
    ResidualReport,
    hadamard_suite,
    verify_bilinear_forms,
    verify_constitutive,
    verify_G_field,
    verify_printed_H,
    verify_shape_derivative_boundary,
    verify_shape_derivative_interior,
    verify_shape_hessian,
)

COMMANDS = ("verify-derivative", "verify-hessian", "bilinear-forms", "hadamard", "moments", "convergence", "all")
EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"invalid config field '{field_name}': {message}")


@dataclass(frozen=True)
class ExperimentConfig:
    command: str = "all"
    eps_list: tuple = (0.2, 0.1, 0.05, 0.025)
    n_samples: int = 100_000
    seed: int = 12345
    grid: int = 16
    quad_degree: int = 9
    out: str = "reports"
    format: str = "csv"
    target: str = "mean"
    quantity: str = "p"
    a: float = 1.0
    b: float = 1.0
    tolerance: float = 0.0  # 0 keeps each check's own tolerance
    workers: int = 1

    def validate(self) -> "ExperimentConfig":
        if self.command not in COMMANDS:
            raise ConfigError("command", f"must be one of {', '.join(COMMANDS)}")
        eps = tuple(self.eps_list)
        if len(eps) == 0:
            raise ConfigError("eps_list", "must not be empty")
        if any(not (0 < e <= EPS_MAX) for e in eps):
            raise ConfigError("eps_list", f"values must lie in (0, {EPS_MAX}]")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ConfigError("eps_list", "values must be strictly decreasing")
        if self.command in ("convergence", "hadamard", "all") and len(eps) < 3:
            raise ConfigError("eps_list", "slope fits need at least 3 values")
        if not 2 <= self.n_samples <= 10**8:
            raise ConfigError("n_samples", "must lie in [2, 1e8]")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed", "must be a 64-bit unsigned integer")
        if not 1 <= self.grid <= 256:
            raise ConfigError("grid", "must lie in [1, 256]")
        if not 1 <= self.quad_degree <= 63:
            raise ConfigError("quad_degree", "must lie in [1, 63]")
        if self.format not in ("csv", "json"):
            raise ConfigError("format", "must be csv or json")
        if self.target not in ("mean", "variance", "taylor-remainder"):
            raise ConfigError("target", "must be mean, variance or taylor-remainder")
        if self.quantity not in ("p", "u", "sigma"):
            raise ConfigError("quantity", "must be p, u or sigma")
        for name in ("a", "b"):
            if not -1 <= getattr(self, name) <= 1:
                raise ConfigError(name, "must lie in [-1, 1]")
        if not self.tolerance >= 0:
            raise ConfigError("tolerance", "must be non-negative")
        if not 1 <= self.workers <= 64:
            raise ConfigError("workers", "must lie in [1, 64]")
        return self

    # -- flat key = value file format ---------------------------------------

    def dumps(self) -> str:
        lines = ["# shapefsi experiment configuration"]
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "eps_list":
                v = ",".join(repr(float(e)) for e in v)
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str, base: "ExperimentConfig | None" = None) -> "ExperimentConfig":
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}", "expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            values[key.replace("-", "_")] = val
        return (base or cls()).updated(values)

    def updated(self, values: dict) -> "ExperimentConfig":
        known = {f.name: f for f in fields(self)}
        conv = {}
        for key, val in values.items():
            if key not in known:
                raise ConfigError(key, "unknown field")
            conv[key] = _convert(key, val, type(getattr(self, key)))
        return replace(self, **conv)

    @property
    def digest(self) -> str:
        """Hash of the result-determining fields (not ``out`` or ``workers``)."""
        skip = {"out", "workers"}
        text = "".join(line + "\n" for line in self.dumps().splitlines() if line.split(" = ")[0] not in skip)
        return hashlib.sha256(text.encode()).hexdigest()


def _convert(key: str, val, typ):
    if not isinstance(val, str):
        return tuple(float(v) for v in val) if typ is tuple else typ(val)
    try:
        if typ is tuple:
            return tuple(float(v) for v in val.split(",") if v.strip())
        if typ is int:
            return int(val)
        if typ is float:
            return float(val)
    except ValueError:
        raise ConfigError(key, f"cannot parse {val!r}") from None
    return val


# -- studies ---------------------------------------------------------------------


def _with_tol(reports, tol: float):
    if tol <= 0:
        return list(reports)
    out = []
    for r in reports:
        if isinstance(r, ResidualReport):
            r = ResidualReport(r.id, r.points, r.residuals, tol)
        out.append(r)
    return out


def study_verify_derivative(cfg: ExperimentConfig) -> StudyResult:
    P = ExampleParams()
    s = PerturbationSample(0.0, cfg.a, cfg.b)
    reps = verify_constitutive(P, s)[:2]
    reps += list(verify_shape_derivative_interior(P, s))
    reps.append(verify_shape_derivative_interior(P, s, solid_coeff=P.mu2)[0])
    reps += verify_shape_derivative_boundary(P, s)
    reps += verify_G_field(P, s)
    return StudyResult("verify-derivative", _with_tol(reps, cfg.tolerance))


def study_verify_hessian(cfg: ExperimentConfig) -> StudyResult:
    from .verify import verify_shape_hessian_interior

    P = ExampleParams()
    s = PerturbationSample(0.0, cfg.a, cfg.b)
    reps = verify_constitutive(P, s)[2:]
    reps += verify_shape_hessian(P, s)
    reps.append(verify_shape_hessian_interior(P, s, solid_coeff=P.mu2)[0])
    reps += verify_printed_H(P, s)
    return StudyResult("verify-hessian", _with_tol(reps, cfg.tolerance))


def study_bilinear_forms(cfg: ExperimentConfig) -> StudyResult:
    ctx = FormContext(cells_per_unit=cfg.grid, gauss_points=points_for_degree(cfg.quad_degree))
    fc = verify_bilinear_forms(ctx)
    table = [{"form": k, "value": v} for k, v in sorted(fc.values.items())]
    return StudyResult("bilinear-forms", _with_tol(fc.reports, cfg.tolerance), table)


def study_hadamard(cfg: ExperimentConfig) -> StudyResult:
    a = cfg.a if cfg.a != 0 else 1.0
    res = hadamard_suite(a, cfg.eps_list)
    return StudyResult("hadamard", [h.report for h in res], kind="convergence")


MC_SIGMAS = 3.0


def study_moments(cfg: ExperimentConfig) -> StudyResult:
    """Monte Carlo vs quadrature for the pressure at 5 points x each eps, plus E[a], E[a^2]."""
    records, table = [], []
    for x in DEFAULT_FLUID_POINTS:
        for e in cfg.eps_list:
            orc = moment_oracle(x, e, "p")
            mc = moment_monte_carlo(x, e, cfg.n_samples, cfg.seed, "p", cfg.workers)
            _, tv = taylor_moment_approximation(x, e, "p")
            table += orc.rows() + mc.rows()
            zm = _z(mc.mean, orc.mean, mc.mean_stderr)
            zv = _z(mc.variance, orc.variance, mc.variance_stderr)
            records.append(
                CheckRecord(
                    f"moments/p@({x[0]:g},{x[1]:g})/eps={e:g}",
                    {
                        "point_x": float(x[0]),
                        "point_y": float(x[1]),
                        "eps": float(e),
                        "oracle_mean": float(orc.mean),
                        "mc_mean": float(mc.mean),
                        "mean_stderr": float(mc.mean_stderr),
                        "oracle_variance": float(orc.variance),
                        "mc_variance": float(mc.variance),
                        "variance_stderr": float(mc.variance_stderr),
                        "taylor_variance": float(tv),
                        "z_mean": zm,
                        "z_variance": zv,
                    },
                    abs(zm) <= MC_SIGMAS and abs(zv) <= MC_SIGMAS,
                )
            )
    records += amplitude_checks(cfg.n_samples, cfg.seed, cfg.workers)
    return StudyResult("moments", records, table, kind="moments")


def _z(est, ref, se) -> float:
    est, ref, se = float(est), float(ref), float(se)
    if se == 0:
        return 0.0 if est == ref else float("inf")
    return (est - ref) / se


def amplitude_checks(n: int, seed: int, workers: int = 1) -> list[CheckRecord]:
    """``E[a] = 0`` and ``E[a^2] = 1/3`` by Gauss quadrature and by Monte Carlo."""
    from .geometry import gauss_legendre

    t, w = gauss_legendre(64)
    q1, q2 = float(np.sum(0.5 * w * t)), float(np.sum(0.5 * w * t**2))
    a = AmplitudeDistribution(seed).samples(n, workers)
    m1, m2 = float(np.sum(a) / n), float(np.sum(a**2) / n)
    se1, se2 = float(np.std(a, ddof=1) / np.sqrt(n)), float(np.std(a**2, ddof=1) / np.sqrt(n))
    return [
        CheckRecord("amplitude/quadrature", {"E[a]": q1, "E[a^2]": q2}, abs(q1) <= 1e-12 and abs(q2 - 1 / 3) <= 1e-12),
        CheckRecord(
            "amplitude/monte-carlo",
            {"E[a]": m1, "E[a]_stderr": se1, "E[a^2]": m2, "E[a^2]_stderr": se2, "n": n},
            abs(m1) <= MC_SIGMAS * se1 and abs(m2 - 1 / 3) <= MC_SIGMAS * se2,
        ),
    ]


def study_convergence(cfg: ExperimentConfig) -> StudyResult:
    if cfg.target == "taylor-remainder":
        reps = [convergence_study(None, cfg.eps_list, "taylor-remainder", seed=cfg.seed)]
    else:
        pts = DEFAULT_FLUID_POINTS if cfg.quantity == "p" else DEFAULT_SOLID_POINTS
        reps = [convergence_study(x, cfg.eps_list, cfg.target, cfg.quantity) for x in pts]
    return StudyResult(f"convergence-{cfg.target}", reps, kind="convergence")


STUDIES = {
    "verify-derivative": study_verify_derivative,
    "verify-hessian": study_verify_hessian,
    "bilinear-forms": study_bilinear_forms,
    "hadamard": study_hadamard,
    "moments": study_moments,
    "convergence": study_convergence,
}


def _studies_for(cfg: ExperimentConfig):
    if cfg.command != "all":
        return [(cfg.command, cfg)]
    jobs = [(name, cfg) for name in STUDIES if name != "convergence"]
    jobs += [("convergence", replace(cfg, target=t)) for t in ("mean", "variance", "taylor-remainder")]
    return jobs


def header_block(cfg: ExperimentConfig) -> dict:
    return {"version": __version__, "config_sha256": cfg.digest, "seed": cfg.seed, "command": cfg.command}


def _write(path: Path, text: str):
    path.write_bytes(text.encode("utf-8"))


def _plot_tables(study: StudyResult):
    if study.kind == "convergence":
        return [(r.id, emit_plot_data(r)) for r in study.records]
    if study.kind == "moments":
        return [("variance", emit_plot_data(study))]
    if study.kind == "residual":
        return [("residuals", emit_plot_data(study))]
    return []


def _slug(s: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in s).strip("_")


def run(cfg: ExperimentConfig, stream=None) -> int:
    """Run the configured studies, write reports, return the exit status."""
    stream = stream or sys.stdout
    cfg = cfg.validate()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    header = header_block(cfg)
    _write(out / "config.txt", cfg.dumps())
    studies = []
    status = EXIT_OK
    for name, sub in _studies_for(cfg):
        try:
            study = STUDIES[name](sub)
        except DegenerateJacobianError as exc:
            print(f"numerical failure in {name}: {exc}", file=stream)
            status = EXIT_NUMERIC
            break
        studies.append(study)
        _write(out / f"{study.name}.{cfg.format}", render_study(study, cfg.format, header))
        for tag, table in _plot_tables(study):
            _write(out / f"plot_{study.name}_{_slug(tag)}.csv", plot_csv(table))
        print(f"{'PASS' if study.passed else 'FAIL'}  {study.name}", file=stream)
    rows = summary_rows(studies)
    if cfg.format == "json":
        _write(out / "summary.json", to_json({"header": header, "reports": rows}))
    else:
        _write(out / "summary.csv", to_csv(rows, header, ["study", "report", "equation", "pass"]))
    if status == EXIT_OK and not all(s.passed for s in studies):
        status = EXIT_FAIL
    return status


# -- argument parsing --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    d = ExperimentConfig()
    p = argparse.ArgumentParser(
        prog="shapefsi",
        description="Shape-derivative verification and random-domain moment studies for the square solid/fluid example.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="flat 'key = value' config file (# comments); flags override it")
    p.add_argument("--eps", help=f"comma-separated decreasing eps values (default {','.join(map(str, d.eps_list))})")
    p.add_argument("--samples", type=int, help=f"Monte Carlo sample count (default {d.n_samples})")
    p.add_argument("--seed", type=int, help=f"master seed (default {d.seed})")
    p.add_argument("--grid", type=int, help=f"quadrature cells per unit length (default {d.grid})")
    p.add_argument("--quad-degree", type=int, help=f"polynomial degree of the cell rule (default {d.quad_degree})")
    p.add_argument("--out", help=f"output directory (default {d.out})")
    p.add_argument("--format", choices=("csv", "json"), help=f"report format (default {d.format})")
    p.add_argument("--target", choices=("mean", "variance", "taylor-remainder"), help=f"convergence target (default {d.target})")
    p.add_argument("--quantity", choices=("p", "u", "sigma"), help=f"field for convergence (default {d.quantity})")
    p.add_argument("--amplitude", type=float, help=f"amplitude a for the verification studies (default {d.a})")
    p.add_argument("--amplitude-b", type=float, help=f"second amplitude b (default {d.b})")
    p.add_argument("--tolerance", type=float, help="override every residual tolerance (default: per-check)")
    p.add_argument("--workers", type=int, help=f"Monte Carlo sampling threads (default {d.workers})")
    return p


FLAG_TO_FIELD = {
    "eps": "eps_list",
    "samples": "n_samples",
    "seed": "seed",
    "grid": "grid",
    "quad_degree": "quad_degree",
    "out": "out",
    "format": "format",
    "target": "target",
    "quantity": "quantity",
    "amplitude": "a",
    "amplitude_b": "b",
    "tolerance": "tolerance",
    "workers": "workers",
}


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError("config", str(exc)) from None
        cfg = ExperimentConfig.loads(text, cfg)
    vals = {FLAG_TO_FIELD[k]: v for k, v in vars(args).items() if k in FLAG_TO_FIELD and v is not None}
    vals["command"] = args.command
    return cfg.updated(vals)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args).validate()
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return run(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DegenerateJacobianError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

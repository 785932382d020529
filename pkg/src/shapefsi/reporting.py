"""Report serialisation (CSV / JSON), summary tables and plot-ready data."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .convergence import ConvergenceReport
from .verify import ResidualReport

CSV_FLOAT = "%.17g"

# descriptive equation ids for report-id prefixes (longest prefix wins)
EQUATION_IDS = {
    "constitutive/exact": "stress-strain law for the exact fields",
    "constitutive/derivative": "stress-strain law for the first shape derivative",
    "constitutive/hessian-printed": "stress-strain law, published second stress derivative",
    "constitutive/hessian": "stress-strain law for the shape Hessian",
    "derivative/solid-momentum": "shape derivative: solid momentum equation",
    "derivative[": "shape derivative: solid momentum with the example's coefficient",
    "derivative/fluid-helmholtz": "shape derivative: fluid Helmholtz equation",
    "derivative/bc-printed": "shape derivative: boundary condition vs published right-hand side",
    "derivative/bc-exact": "shape derivative: boundary condition vs true derivative",
    "G/row-sums": "boundary datum G: published matrix vs general form",
    "hessian/solid-momentum": "shape Hessian: solid momentum equation",
    "hessian[": "shape Hessian: solid momentum with the example's coefficient",
    "hessian/fluid-helmholtz": "shape Hessian: fluid Helmholtz equation",
    "hessian/bc-printed": "shape Hessian: boundary condition vs published right-hand side",
    "hessian/bc-exact": "shape Hessian: boundary condition vs true Hessian",
    "H/": "Hessian boundary data H2, H3, H4 on the top interface",
    "forms/": "mixed bilinear forms",
    "hadamard/volume": "Hadamard formula, domain functional",
    "hadamard/boundary": "Hadamard formula, boundary functional",
    "convergence/mean": "mean of the random solution: second-order accuracy",
    "convergence/variance": "variance of the random solution: first-derivative approximation",
    "convergence/taylor-remainder": "shape Taylor expansion remainder",
    "moments/": "Monte Carlo vs quadrature moments",
    "amplitude/": "moments of the uniform amplitude",
}


def equation_id(report_id: str) -> str:
    best = ""
    for prefix in EQUATION_IDS:
        if report_id.startswith(prefix) and len(prefix) > len(best):
            best = prefix
    return EQUATION_IDS.get(best, "unclassified")


@dataclass(frozen=True)
class CheckRecord:
    """Generic pass/fail record (used for statistical comparisons)."""

    id: str
    values: dict
    passed: bool

    def to_dict(self) -> dict:
        d = {"id": self.id}
        d.update(self.values)
        d["pass"] = bool(self.passed)
        return d


@dataclass
class StudyResult:
    name: str
    records: list  # ResidualReport | ConvergenceReport | CheckRecord
    table: list = field(default_factory=list)  # optional extra data rows (dicts)
    kind: str = "residual"  # residual | convergence | moments | checks

    @property
    def passed(self) -> bool:
        return all(bool(r.passed) for r in self.records)

    def record_dicts(self) -> list[dict]:
        return [r.to_dict() for r in self.records]


def _fmt(v: Any) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return CSV_FLOAT % float(v)
    if isinstance(v, (list, tuple)):
        return ";".join(_fmt(x) for x in v)
    return str(v)


def to_csv(rows: Sequence[dict], header: dict | None = None, columns: Sequence[str] | None = None) -> str:
    """RFC-4180 CSV, 17 significant digits; provenance as leading ``# key=value`` lines."""
    buf = io.StringIO()
    if header:
        for k in sorted(header):
            buf.write(f"# {k}={header[k]}\r\n")
    if columns is None:
        columns = []
        for r in rows:
            for k in r:
                if k not in columns:
                    columns.append(k)
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c, "")) for c in columns])
    return buf.getvalue()


def _json_safe(v):
    if isinstance(v, dict):
        return {k: _json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    if isinstance(v, np.ndarray):
        return _json_safe(v.tolist())
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, (np.floating, float)):
        f = float(v)
        return f if math.isfinite(f) else str(f)
    if isinstance(v, np.integer):
        return int(v)
    return v


def to_json(payload: dict) -> str:
    return json.dumps(_json_safe(payload), indent=2, sort_keys=True) + "\n"


def study_rows(study: StudyResult) -> list[dict]:
    if study.kind == "convergence":
        rows = []
        for r in study.records:
            for e, err in zip(r.eps_list, r.error_list):
                rows.append(
                    {
                        "id": r.id,
                        "eps": e,
                        "error": err,
                        "slope": r.slope,
                        "intercept": r.intercept,
                        "target_slope": r.target_slope,
                        "pass": r.passed,
                    }
                )
        return rows
    if study.kind == "moments":
        return list(study.table)
    return study.record_dicts()


MOMENT_COLUMNS = ["point_x", "point_y", "eps", "value", "stderr", "n", "method", "quantity", "statistic"]
RESIDUAL_COLUMNS = ["id", "norm_max", "norm_rms", "tolerance", "pass", "n_points"]


def render_study(study: StudyResult, fmt: str, header: dict) -> str:
    if fmt == "json":
        payload = {"header": header, "study": study.name, "pass": study.passed, "records": study.record_dicts()}
        if study.table:
            payload["table"] = study.table
        return to_json(payload)
    cols = None
    if study.kind == "moments":
        cols = MOMENT_COLUMNS
    elif study.kind == "residual":
        cols = RESIDUAL_COLUMNS
    return to_csv(study_rows(study), header, cols)


def summary_rows(studies: Sequence[StudyResult]) -> list[dict]:
    rows = []
    for s in studies:
        for r in s.records:
            rows.append({"study": s.name, "report": r.id, "equation": equation_id(r.id), "pass": bool(r.passed)})
    return rows


# -- plot data ----------------------------------------------------------------------


def emit_plot_data(report) -> list[list]:
    """Plot-ready table (first row is the header).

    * :class:`ConvergenceReport`: ``log_eps, log_error, log_reference`` rows with
      eps descending; the reference line has the target slope through the
      first point.
    * sequence of :class:`ResidualReport`: ``id, max_residual`` per report.
    * moments :class:`StudyResult`: ``point_x, point_y, eps, variance, taylor_variance``.
    """
    if isinstance(report, ConvergenceReport):
        order = np.argsort(report.eps_list)[::-1]
        eps = np.asarray(report.eps_list)[order]
        err = np.asarray(report.error_list)[order]
        le = np.log(eps)
        with np.errstate(divide="ignore"):
            lr = np.log(err)
        ref = lr[0] + report.target_slope * (le - le[0])
        return [["log_eps", "log_error", "log_reference"]] + [
            [float(a), float(b), float(c)] for a, b, c in zip(le, lr, ref)
        ]
    if isinstance(report, StudyResult) and report.kind == "moments":
        rows = [["point_x", "point_y", "eps", "variance", "taylor_variance"]]
        for t in report.records:
            v = t.values
            if "taylor_variance" in v:
                rows.append([v["point_x"], v["point_y"], v["eps"], v["oracle_variance"], v["taylor_variance"]])
        return rows
    if isinstance(report, StudyResult):
        report = report.records
    reps = list(report)
    if all(isinstance(r, ResidualReport) for r in reps):
        return [["id", "max_residual"]] + [[r.id, r.norm_max] for r in reps]
    raise TypeError(f"no plot data for {type(report).__name__}")


def plot_csv(table: list[list]) -> str:
    header, body = table[0], table[1:]
    return to_csv([dict(zip(header, row)) for row in body], columns=header)

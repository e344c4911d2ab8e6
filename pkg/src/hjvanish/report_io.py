"""CSV, JSON and SVG writers for experiment results.

Data files are deterministic functions of their inputs. Wall time and other
run-dependent facts go to a sibling ``<stem>.provenance.json`` so the report
itself can be compared byte for byte across runs.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .asymptotics import CCurve, ExpansionReport, FamilyLimitResult, OrderingReport
from .counterexample import DivergenceCertificate
from .ergodic import ErgodicResult
from .errors import SchemaError, ValidationError
from .hj_solver import ValueFunction
from .mather_lp import ExpansionBounds, OccupationMeasure

__all__ = [
    "SCHEMA_VERSION",
    "ExperimentReport",
    "payload",
    "write_csv",
    "read_csv",
    "write_report",
    "read_report",
    "write_svg_profile",
    "jsonable",
]

SCHEMA_VERSION = "1"


def _fmt(v: Any) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(header: Sequence[str], rows: Iterable[Sequence[Any]], path: str | Path) -> None:
    """Header plus rows, LF line endings, floats at 17 significant digits.

    Raises:
        ValidationError: a row length differs from the header.
        OSError: the file cannot be written (message names the path).
    """
    path = Path(path)
    header = list(header)
    lines = []
    for i, row in enumerate(rows):
        row = list(row)
        if len(row) != len(header):
            raise ValidationError(f"row {i} has {len(row)} fields, header has {len(header)}")
        lines.append([_fmt(v) for v in row])
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(lines)
    except OSError as exc:
        raise OSError(f"cannot write CSV {path}: {exc.strerror or exc}") from exc


def read_csv(path: str | Path) -> tuple[list[str], list[list[str]]]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError(f"{path} is empty")
    return rows[0], rows[1:]


def jsonable(obj: Any) -> Any:
    """Plain JSON types; non-finite floats become the strings 'nan', 'inf', '-inf'."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    if obj is None or isinstance(obj, str):
        return obj
    raise SchemaError(f"cannot serialize {type(obj).__name__}")


def _grid_x(grid) -> list:
    return grid.x.tolist() if grid.dim == 1 else grid.nodes.tolist()


def _bounds(b: ExpansionBounds | None) -> dict | None:
    if b is None:
        return None
    return {
        "c1_minus": b.c1_minus,
        "c1_plus": b.c1_plus,
        "lp_value": b.value,
        "eps_pin": b.eps_pin,
        "face_columns": b.face_columns,
        "available": b.available,
        "note": b.note,
    }


def payload(result: Any) -> tuple[str, dict]:
    """(payload type, flat dict) for a supported result object.

    Raises:
        SchemaError: unsupported type.
    """
    if isinstance(result, ErgodicResult):
        return "ergodic", {
            "c": result.c,
            "deltas": result.deltas,
            "c_estimates_by_delta": result.estimates,
            "fit_degree": result.order,
            "fit_residual": result.residual,
            "x_ref": result.x_ref,
            "unstable": result.unstable,
        }
    if isinstance(result, ExpansionReport):
        return "expansion", {
            "c0": result.c0,
            "slope_table": [list(r) for r in result.slope_table()],
            "slope_table_columns": ["lambda", "r", "c_of_lambda", "slope"],
            "c1_minus_fd": result.c1_minus,
            "c1_plus_fd": result.c1_plus,
            "verdict": result.verdict,
            "slope_bound": result.bound_constant,
            "lp_bounds": _bounds(result.lp),
            "lp_agrees": result.lp_agrees,
            "tolerance": result.tol,
        }
    if isinstance(result, FamilyLimitResult):
        return "family", {
            "family": result.family,
            "lambdas": result.lambdas,
            "t_values": result.t,
            "x": _grid_x(result.base_grid),
            "limit_profile": None if result.limit is None else result.limit,
            "verdict": result.verdict,
            "sup_norms": result.sup_norms,
            "fit_residual": result.residual,
            "c0": result.c0,
            "c_of_lambda": result.c_lambda,
            "bound_constant": result.bound_constant,
            "cluster_profiles": {str(k): v for k, v in result.clusters.items()},
            "cluster_gap": result.cluster_gap,
            "cross_check_sup": result.cross_check,
            "failures": [list(f) for f in result.failures],
        }
    if isinstance(result, DivergenceCertificate):
        return "divergence", {
            "K": result.K,
            "x": result.base_x,
            "schedule_table": [list(r) for r in result.table],
            "schedule_columns": ["k", "r", "z", "c_of_lambda", "tau", "phi", "r_over_phi", "modulus_error"],
            "limit_odd": result.limit_odd,
            "limit_even": result.limit_even,
            "reference_odd": result.reference_odd,
            "reference_even": result.reference_even,
            "gap_sup": result.gap,
            "l1_norm": result.l1,
            "threshold": result.threshold,
            "diverges": result.diverges,
            "core_distance": result.core_distance,
            "meta": result.meta,
        }
    if isinstance(result, ValueFunction):
        return "value_function", {
            "x": _grid_x(result.grid),
            "u": result.values,
            "delta": result.delta,
            "sweep_cycles": result.iterations,
            "final_change": result.final_change,
            "meta": result.meta,
        }
    if isinstance(result, CCurve):
        return "c_curve", {
            "c_table": [list(r) for r in result.table()],
            "c_table_columns": ["lambda", "c_of_lambda", "left_quotient", "right_quotient"],
            "kinks": result.kinks,
            "convexity_violation": result.convexity_violation,
            "derivative_at_zero": result.derivative_at_zero,
        }
    if isinstance(result, OrderingReport):
        return "ordering", {
            "gammas": result.gammas,
            "x": _grid_x(result.base_grid),
            "profiles": {format(g, "g"): v for g, v in result.limits.items()},
            "ordering_violation": result.ordering_violation,
            "concavity_violation": result.concavity_violation,
            "midpoint_gap": result.midpoint_gap,
            "violations": result.violations,
            "touches_u0_inside": {format(g, "g"): v for g, v in result.equal_interior.items()},
        }
    if isinstance(result, OccupationMeasure):
        return "mather", {
            "lp_value": result.value,
            "mass": result.mass,
            "support": [[list(x), list(v), w] for x, v, w in result.support()],
            "holonomy_residual_max": float(np.max(np.abs(result.holonomy_residual), initial=0.0)),
        }
    if isinstance(result, dict):
        return "table", result
    raise SchemaError(f"unknown payload type {type(result).__name__}")


@dataclass
class ExperimentReport:
    command: str
    config: dict
    result: Any
    metadata: dict = field(default_factory=dict)
    wall_time: float | None = None

    def document(self) -> dict:
        kind, data = payload(self.result)
        return jsonable(
            {
                "schema_version": SCHEMA_VERSION,
                "command": self.command,
                "config": self.config,
                "payload_type": kind,
                "payload": data,
                "metadata": self.metadata,
            }
        )


def _dump(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=1, ensure_ascii=False, allow_nan=False) + "\n"


def write_report(report: ExperimentReport, path: str | Path) -> Path:
    """Write the JSON report, plus the provenance sibling when wall time is set.

    Returns:
        the report path.
    """
    path = Path(path)
    text = _dump(report.document())
    try:
        path.write_text(text, encoding="utf-8")
        if report.wall_time is not None:
            prov = path.with_name(path.stem + ".provenance.json")
            prov.write_text(_dump({"schema_version": SCHEMA_VERSION, "wall_time_s": report.wall_time}), encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write report {path}: {exc.strerror or exc}") from exc
    return path


def read_report(path: str | Path) -> dict:
    """Parse a report written by :func:`write_report`.

    Raises:
        SchemaError: missing or unsupported schema version.
    """
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(doc, dict) or doc.get("schema_version") != SCHEMA_VERSION:
        raise SchemaError(f"{path}: unsupported report schema")
    return doc


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2")


def write_svg_profile(
    x: Sequence[float],
    profiles: dict[str, Sequence[float]],
    path: str | Path,
    title: str = "",
    width: int = 640,
    height: int = 400,
) -> None:
    """Line plot of one or more profiles on a common abscissa (SVG 1.1).

    Raises:
        ValidationError: no profiles, or a profile of the wrong length.
    """
    x = np.asarray(x, dtype=float)
    if not profiles:
        raise ValidationError("at least one profile is required")
    ys = {k: np.asarray(v, dtype=float) for k, v in profiles.items()}
    for k, y in ys.items():
        if y.shape != x.shape:
            raise ValidationError(f"profile {k!r} does not match the abscissa")
    m = 50
    pw, ph = width - 2 * m, height - 2 * m
    x0, x1 = float(x.min()), float(x.max())
    allv = np.concatenate([y[np.isfinite(y)] for y in ys.values()] or [np.zeros(1)])
    y0, y1 = (float(allv.min()), float(allv.max())) if allv.size else (0.0, 1.0)
    if y1 - y0 < 1e-12:
        y0, y1 = y0 - 0.5, y1 + 0.5
    if x1 - x0 < 1e-12:
        x0, x1 = x0 - 0.5, x1 + 0.5

    def px(v):
        return m + (v - x0) / (x1 - x0) * pw

    def py(v):
        return m + ph - (v - y0) / (y1 - y0) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<line id="x-axis" x1="{m}" y1="{m + ph}" x2="{m + pw}" y2="{m + ph}" stroke="black"/>',
        f'<line id="y-axis" x1="{m}" y1="{m}" x2="{m}" y2="{m + ph}" stroke="black"/>',
        f'<text x="{m}" y="{m + ph + 18}" font-size="11">{x0:.4g}</text>',
        f'<text x="{m + pw}" y="{m + ph + 18}" font-size="11" text-anchor="end">{x1:.4g}</text>',
        f'<text x="{m - 4}" y="{m + ph}" font-size="11" text-anchor="end">{y0:.4g}</text>',
        f'<text x="{m - 4}" y="{m + 10}" font-size="11" text-anchor="end">{y1:.4g}</text>',
    ]
    if title:
        out.append(f'<text x="{width / 2:.1f}" y="24" font-size="14" text-anchor="middle">{_esc(title)}</text>')
    for i, (name, y) in enumerate(ys.items()):
        color = _COLORS[i % len(_COLORS)]
        ok = np.isfinite(y)
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x[ok], y[ok]))
        out.append(f'<polyline id="profile-{i}" fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = m + 14 + 16 * i
        out.append(f'<line x1="{m + pw - 120}" y1="{ly - 4}" x2="{m + pw - 100}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{m + pw - 95}" y="{ly}" font-size="11">{_esc(name)}</text>')
    out.append("</svg>")
    try:
        Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write SVG {path}: {exc.strerror or exc}") from exc


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")

import csv
import json
import math
from dataclasses import fields
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Tuple, Union

from ..models.report import Algorithm, SolveReport, TraceRecord

PathLike = Union[str, Path]

SCHEMA_VERSION = 1

TRACE_COLUMNS = [f.name for f in fields(TraceRecord)]

PATH_COLUMNS = ["schema_version", "w1", "w2", "converged", "obj_primal", "eta_G", "eta_D", "eta_kkt",
                "nnz999", "outer_iters", "inner_iters_total", "wall_ms", "top_k_indices", "top_k_values"]

COMPARE_COLUMNS = ["schema_version", "instance", "factor", "algorithm", "w1", "w2", "converged", "obj_primal",
                   "eta_G", "eta_D", "eta_kkt", "nnz999", "iterations", "inner_iters", "wall_ms"]


def _cell(value: Any) -> str:
    """CSV text of a value; floats carry 17 significant digits."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Algorithm):
        return value.value
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _json_safe(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value


def result_record(report: SolveReport, instance: str, weights: Dict[str, Any], top_k: int = 10,
                  include_solution: bool = False) -> Dict[str, Any]:
    """
    The versioned result document of one solve.

    :param report: Solver output.
    :type report: SolveReport
    :param instance: Description of the data source.
    :type instance: str
    :param weights: Where the weights came from, e.g. ``{"w1": ..., "w2": ...}``.
    :type weights: Dict[str, Any]
    :param top_k: Number of leading coefficients to list.
    :type top_k: int
    :param include_solution: Also store the full ``x`` and ``y``.
    :type include_solution: bool
    :return: A JSON-serializable dict.
    :rtype: Dict[str, Any]
    """
    record = {"schema_version": SCHEMA_VERSION, "instance": instance, "weights": weights}
    record.update(report.summary())
    record["top_k"] = [{"index": i, "value": v} for i, v in report.top_k(top_k)]
    if include_solution:
        record["x"] = [float(v) for v in report.x]
        record["y"] = [float(v) for v in report.y]
    return record


def report_json_text(record: Dict[str, Any]) -> str:
    """
    JSON text of a result document. ``json`` emits the shortest repr of every
    float, which round-trips 64-bit values exactly; non-finite values become
    ``null``.
    """
    return json.dumps(_json_safe(record), indent=2) + "\n"


def write_report_json(path: PathLike, record: Dict[str, Any]):
    with open(path, "w") as fh:
        fh.write(report_json_text(record))


def _write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence[Any]]):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def write_trace_csv(path: PathLike, history: List[TraceRecord]):
    """One row per trace record, with the schema version as first column."""
    _write_csv(path, ["schema_version"] + TRACE_COLUMNS,
               ([SCHEMA_VERSION] + list(r.as_dict().values()) for r in history))


def _path_row(w1: float, w2: float, report: SolveReport, top: List[Tuple[int, float]]) -> List[Any]:
    return [SCHEMA_VERSION, w1, w2, report.converged, report.obj_primal, report.eta_G, report.eta_D,
            report.eta_kkt, report.nnz999, report.outer_iters, report.inner_iters_total, report.wall_ms,
            ";".join(str(i) for i, _ in top), ";".join(format(v, ".17g") for _, v in top)]


def write_path_csv(path: PathLike, points: Iterable[Any]):
    """
    One row per path point (objects with ``w1``, ``w2``, ``report`` and
    ``top_k``); the leading coefficients are ``;``-joined.
    """
    _write_csv(path, PATH_COLUMNS, (_path_row(pt.w1, pt.w2, pt.report, pt.top_k) for pt in points))


def write_compare_csv(path: PathLike, rows: Iterable[Any]):
    _write_csv(path, COMPARE_COLUMNS,
               ([SCHEMA_VERSION] + [getattr(r, c) for c in COMPARE_COLUMNS[1:]] for r in rows))


def write_profile_csv(path: PathLike, profile: Iterable[Tuple[Algorithm, float, float]]):
    _write_csv(path, ["schema_version", "algorithm", "tau", "fraction"],
               ([SCHEMA_VERSION, a, tau, frac] for a, tau, frac in profile))

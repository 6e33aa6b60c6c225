"""Serialisation of reports, grids, traces and plot-ready tables.

Layout of a results directory::

    ledger.csv                one row per configuration
    reports/<config>.json     SB report
    points/<config>.csv       final points, one row per run
    traces/<config>.csv       emergence trace

``<config>`` is the configuration id with ``/`` replaced by ``_``.
"""

from __future__ import annotations

import csv
import json
import os
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .experiment import LEDGER_COLUMNS, EmergenceTrace, GridResult, GridRow
from .metrics import SBReport


@contextmanager
def _opened(path: str | os.PathLike, mode: str = "w"):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open(mode, newline="") as fh:
            yield fh
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def write_report_json(report: SBReport, path) -> Path:
    with _opened(path) as fh:
        fh.write(report.to_json() + "\n")
    return Path(path)


def read_report_json(path) -> SBReport:
    with Path(path).open() as fh:
        return SBReport.from_dict(json.load(fh))


def write_points_csv(points: np.ndarray, path) -> Path:
    """Parallel-coordinates table: ``run_id, x_1 .. x_n``."""
    points = np.asarray(points)
    with _opened(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["run_id"] + [f"x_{j + 1}" for j in range(points.shape[1])])
        for i, row in enumerate(points):
            w.writerow([i] + [repr(float(v)) for v in row])
    return Path(path)


def read_points_csv(path) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 1:]


def write_trace_csv(trace: EmergenceTrace, path) -> Path:
    with _opened(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["evals", "sb"])
        for e, s in zip(trace.evaluations, trace.sb):
            w.writerow([e, repr(float(s))])
    return Path(path)


def read_trace_csv(path, config_id: str = "", runs_pooled: int = 0) -> EmergenceTrace:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    return EmergenceTrace(
        config_id=config_id,
        evaluations=[int(r["evals"]) for r in rows],
        sb=[float(r["sb"]) for r in rows],
        runs_pooled=runs_pooled,
        sample_size=0,
    )


def write_grid_csv(result: GridResult, path) -> Path:
    with _opened(path) as fh:
        w = csv.DictWriter(fh, fieldnames=LEDGER_COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in result.rows:
            w.writerow(row.to_record())
    return Path(path)


def heatmap_table(
    result: GridResult, variant: str, p: int, sdis: str
) -> tuple[list[float], list[float | None], np.ndarray]:
    """SB scores of one ``variant-pN-SDIS`` slice as an ``F x Cr`` matrix.

    Missing cells are ``nan``. ``current-to-rand/1`` slices have a single
    column whose ``Cr`` label is ``None``.
    """
    rows: list[GridRow] = [
        r for r in result.rows
        if r.variant == variant and r.p == p and r.sdis.lower() == sdis.lower()
    ]
    F_values = sorted({r.F for r in rows})
    Cr_values = sorted({r.Cr for r in rows}, key=lambda c: -1.0 if c is None else c)
    table = np.full((len(F_values), len(Cr_values)), np.nan)
    for r in rows:
        table[F_values.index(r.F), Cr_values.index(r.Cr)] = r.sb_score
    return F_values, Cr_values, table


def write_heatmap_csv(result: GridResult, variant: str, p: int, sdis: str, path) -> Path:
    """Heatmap slice with ``F`` rows and one column per ``Cr`` value."""
    F_values, Cr_values, table = heatmap_table(result, variant, p, sdis)
    with _opened(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["F"] + ["Cr=" + ("none" if c is None else f"{c:.3f}") for c in Cr_values])
        for F, row in zip(F_values, table):
            w.writerow([f"{F:.3f}"] + [repr(float(v)) for v in row])
    return Path(path)


def export(result, fmt: str, path, **slice_args) -> Path:
    """Write ``result`` in ``fmt``.

    ``fmt`` is one of ``json`` (SB report), ``csv`` (grid rows or trace),
    ``points`` (final-point matrix), or ``heatmap`` (grid slice; pass
    ``variant``, ``p`` and ``sdis``).
    """
    if fmt == "json" and isinstance(result, SBReport):
        return write_report_json(result, path)
    if fmt == "csv" and isinstance(result, GridResult):
        return write_grid_csv(result, path)
    if fmt == "csv" and isinstance(result, EmergenceTrace):
        return write_trace_csv(result, path)
    if fmt == "points":
        return write_points_csv(result, path)
    if fmt == "heatmap" and isinstance(result, GridResult):
        return write_heatmap_csv(result, path=path, **slice_args)
    raise ValueError(f"cannot export {type(result).__name__} as {fmt!r}")

import csv
import json

import numpy as np
import pytest

from debias.experiment import EmergenceTrace, GridResult, GridRow
from debias.export import (
    export,
    heatmap_table,
    read_points_csv,
    read_report_json,
    read_trace_csv,
    write_heatmap_csv,
)
from debias.metrics import BiasClass, sb_score


def _grid():
    rows = []
    for F in (0.05, 0.266, 0.483, 0.7, 0.916, 1.133, 1.35, 1.566, 1.783, 2.0):
        for Cr in (0.05, 0.285, 0.52, 0.755, 0.99):
            rows.append(GridRow(f"DE/best/1/bin-p5-sat-F{F:.3f}-Cr{Cr:.3f}", "best/1", "bin", 5, F, Cr,
                                "sat", 30, 100, 600, F * Cr, BiasClass.MILD))
    rows.append(GridRow("DE/curr-to-rand/1-p5-sat-F0.050", "current-to-rand/1", "none", 5, 0.05, None,
                        "sat", 30, 100, 600, 3.0, BiasClass.MILD))
    return GridResult(rows)


def test_heatmap_slice_shape():
    F, Cr, table = heatmap_table(_grid(), "DE/best/1/bin", 5, "sat")
    assert table.shape == (10, 5)
    assert table[4, 2] == pytest.approx(0.916 * 0.52)
    F, Cr, table = heatmap_table(_grid(), "DE/curr-to-rand/1", 5, "sat")
    assert table.shape == (1, 1) and Cr == [None]


def test_heatmap_csv(tmp_path):
    path = write_heatmap_csv(_grid(), "DE/best/1/bin", 5, "sat", tmp_path / "h.csv")
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["F", "Cr=0.050", "Cr=0.285", "Cr=0.520", "Cr=0.755", "Cr=0.990"]
    assert len(rows) == 11


def test_points_csv(tmp_path):
    pts = np.random.default_rng(0).random((600, 30))
    path = export(pts, "points", tmp_path / "pts.csv")
    rows = list(csv.reader(path.open()))
    assert len(rows) == 601 and len(rows[0]) == 31
    assert rows[0][:2] == ["run_id", "x_1"]
    np.testing.assert_array_equal(read_points_csv(path), pts)


def test_trace_csv(tmp_path):
    tr = EmergenceTrace("c", [20, 120, 220], [0.0, 5.5, 7.25], 100, 2000)
    path = export(tr, "csv", tmp_path / "t.csv")
    assert path.read_text().splitlines() == ["evals,sb", "20,0.0", "120,5.5", "220,7.25"]
    assert read_trace_csv(path).sb == tr.sb


def test_report_json(tmp_path):
    rep = sb_score(np.random.default_rng(1).random((40, 4)), config_id="DE/rand/1/bin-p5-sat-F0.050-Cr0.050")
    path = export(rep, "json", tmp_path / "r.json")
    data = json.loads(path.read_text())
    assert data["config_id"] == rep.config_id and len(data["per_dim"]) == 4
    assert read_report_json(path).sb_score == rep.sb_score


def test_grid_csv_and_bad_format(tmp_path):
    path = export(_grid(), "csv", tmp_path / "g.csv")
    assert len(path.read_text().splitlines()) == 52
    with pytest.raises(ValueError):
        export(_grid(), "xml", tmp_path / "g.xml")


def test_io_error_names_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError, match="file"):
        export(np.zeros((2, 2)), "points", blocker / "sub" / "p.csv")

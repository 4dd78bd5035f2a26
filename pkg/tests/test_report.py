import numpy as np
import pytest

import qpush as qp
from qpush.report import (TRACE_COLUMNS, default_record_every, parse_trace_csv,
                          record_schedule, render_convergence_svg, slope_check,
                          write_full_trace_csv, write_summary, write_trace_csv)


def test_record_schedule():
    assert record_schedule(5, 1) == [1, 2, 3, 4, 5]
    assert record_schedule(1000, 1)[-1] == 1000
    assert record_schedule(10_000, 10)[:2] == [1, 10]
    assert default_record_every(1000) == 1
    assert default_record_every(100_000) == 100


def small_report():
    prog = qp.fig1_num_instance().program()
    return qp.run(prog, np.zeros(10), 10.0, 120, record_every=7)


def test_csv_round_trip(tmp_path):
    rep = small_report()
    path = tmp_path / "trace.csv"
    write_trace_csv(rep, path)
    cols = parse_trace_csv(path)
    assert tuple(cols.keys()) == TRACE_COLUMNS
    ref = rep.columns()
    for name in TRACE_COLUMNS:
        assert np.array_equal(cols[name], ref[name], equal_nan=True), name


def test_full_trace_sidecar(tmp_path):
    rep = small_report()
    path = tmp_path / "full.csv"
    write_full_trace_csv(rep, path)
    lines = path.read_text().splitlines()
    assert lines[0].split(",")[:2] == ["t", "x_0"]
    assert len(lines) == 1 + len(rep.t)
    first = np.array([float(v) for v in lines[1].split(",")])
    assert np.array_equal(first[1:11], rep.x[0])
    assert np.array_equal(first[11:], rep.Q[0])


def test_summary_contents(tmp_path):
    import json

    rep = small_report()
    path = tmp_path / "summary.json"
    write_summary(rep, path, extra={"note": 1})
    data = json.loads(path.read_text())
    assert data["algorithm"] == "vq"
    assert data["alpha"] == 10.0
    assert data["t"] == 120
    assert data["note"] == 1
    assert data["f_xbar"] == rep.final["f_xbar"]


def test_slope_check_exact_power_laws():
    t = np.arange(1, 2001)
    res = slope_check(t, 7.3 / t, (10, 2000))
    assert not res.skipped
    assert res.slope == pytest.approx(-1.0, abs=1e-6)
    res_half = slope_check(t, 2.0 / np.sqrt(t), (10, 2000))
    assert res_half.slope == pytest.approx(-0.5, abs=1e-6)


def test_slope_check_skips_below_floor():
    t = np.arange(1, 101)
    err = 1.0 / t
    err[50] = 0.0
    res = slope_check(t, err, (1, 100))
    assert res.skipped and res.reason == "converged-below-floor"
    assert np.isnan(res.slope)
    empty = slope_check(t, err, (1000, 2000))
    assert empty.skipped and empty.reason == "empty-window"


def test_svg_rendering_and_replot(tmp_path):
    rep = small_report()
    csv_path = tmp_path / "trace.csv"
    write_trace_csv(rep, csv_path)
    _, _, f_star = qp.fig1_reference()
    one = tmp_path / "a.svg"
    two = tmp_path / "b.svg"
    qp.plot_trace(csv_path, one, f_star=f_star)
    qp.plot_trace(csv_path, two, f_star=f_star)
    assert one.read_bytes() == two.read_bytes()
    body = one.read_text()
    assert body.startswith("<svg") and "polyline" in body and "1/t" in body


def test_svg_without_reference():
    cols = {"t": np.array([1.0, 10.0, 100.0]),
            "f_xbar": np.array([3.0, 2.0, 1.5]),
            "max_violation": np.array([0.5, 0.05, 0.005])}
    svg = render_convergence_svg(cols)
    assert "max violation" in svg
    svg_b = render_convergence_svg(cols, f_star=1.0, bound_constant=4.0)
    assert "bound" in svg_b

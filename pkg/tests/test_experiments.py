import csv
import filecmp
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from circlaw import experiments as ex
from circlaw.measures import InitialSegment, count_matrix
from circlaw.sampler import sample_spectrum
from circlaw.spiral import lattice

SMALL = ex.ExperimentConfig(
    n_grid=(16, 25, 36), reps=3, seed=7, counting_n=64, counting_reps=120, counting_j=(2, 3),
    deviation_n=256, deviation_reps=12, deviation_ell=(4, 8), edge_reps=40,
    tv_n=(1, 4), coupling_n=(16,), quantization_n=(16,), means_r=(0.3, 0.6), variance_n=16,
    outside_n=(1, 16), outside_R=(1.0, 2.0))


def test_config_defaults_and_invariants():
    cfg = ex.ExperimentConfig()
    assert cfg.n_grid == (64, 144, 256, 576, 1024) and cfg.reps == 50
    assert cfg.resolution(64) == 64 and cfg.resolution(10) == 16
    assert cfg.replace(M_factor=4).resolution(64) == 256
    for bad in ({"reps": 0}, {"n_grid": (1, 4)}, {"m_policy": "x"}, {"solver_mode": "fast"}, {"M_factor": 0},
                {"p_list": (0.5,)}, {"threads": 0}):
        with pytest.raises(ex.ConfigError):
            cfg.replace(**bad)


@settings(max_examples=50)
@given(st.integers(2, 5000), st.integers(1, 9))
def test_resolution_is_square_and_large_enough(n, f):
    M = ex.ExperimentConfig(M_factor=f).resolution(n)
    assert math.isqrt(M) ** 2 == M and M >= n


def test_config_parsing(tmp_path):
    text = """
    # comment
    n_grid = 16, 25
    reps = 4
    p_list = 1
    seed = -3
    solver_mode = auction
    tol.wilson_level = 0.95
    output_dir = out  # trailing comment
    """
    cfg = ex.parse_config_text(text)
    assert cfg.n_grid == (16, 25) and cfg.reps == 4 and cfg.p_list == (1.0,) and cfg.seed == -3
    assert cfg.solver_mode == "auction" and cfg.tolerances["wilson_level"] == 0.95 and cfg.output_dir == "out"
    assert cfg.tolerances["var_tol"] == 1e-4
    for bad in ("nope = 1", "reps = two", "reps", "reps = 0"):
        with pytest.raises(ex.ConfigError):
            ex.parse_config_text(bad)
    path = tmp_path / "c.cfg"
    path.write_text("reps = 2\n")
    assert ex.load_config(path).reps == 2


def _wilson_formula(k, n, level):
    z = stats.norm.ppf(0.5 + level / 2)
    p = k / n
    centre = (p + z * z / (2 * n)) / (1 + z * z / n)
    half = z / (1 + z * z / n) * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    return centre - half, centre + half


@pytest.mark.parametrize("k,n", [(0, 10), (3, 10), (10, 10), (17, 2000), (1000, 2000)])
def test_wilson_matches_formula(k, n):
    lo, hi = ex.wilson(k, n, 0.99)
    flo, fhi = _wilson_formula(k, n, 0.99)
    assert lo == pytest.approx(max(flo, 0.0), abs=1e-12) and hi == pytest.approx(min(fhi, 1.0), abs=1e-12)


def test_fit_slope():
    ns = [64, 144, 256, 576, 1024]
    means = [3.0 * n**-0.25 for n in ns]
    slope, icpt, se = ex.fit_slope(ns, means)
    assert slope == pytest.approx(-0.25) and icpt == pytest.approx(math.log(3.0)) and se == pytest.approx(0, abs=1e-12)
    assert ex.fit_slope([64, 64, 256], [1, 1, 0.5]) == (None, None, None)


def test_rate_experiment_small():
    rep = ex.run_rate_experiment(SMALL)
    assert len(rep.records) == 3 * 3 * 2 and not rep.failures
    for r in rep.records:
        assert r.lower <= r.value <= r.upper and r.spiral_upper >= r.value
    fit = rep.fit_for(1.0)
    assert fit.slope is not None and fit.n_points == 3
    assert all(e.status != "fail" for e in rep.ledger)
    assert any(e.anchor.startswith("implied c") for e in rep.ledger)


def test_rate_single_n_has_no_slope():
    rep = ex.run_rate_experiment(SMALL.replace(n_grid=(16,), reps=2, p_list=(1.0,)))
    assert rep.fit_for(1.0).slope is None and len(rep.summary) == 1


def test_rate_cell_errors_are_recorded(monkeypatch):
    import circlaw.transport as tr

    monkeypatch.setattr(tr, "MAX_COST_ENTRIES", 300)
    rep = ex.run_rate_experiment(SMALL.replace(n_grid=(16, 25), reps=1, p_list=(1.0,)))
    statuses = {r.n: r.status for r in rep.records}
    assert statuses[16] == "ok" and statuses[25].startswith("error: ResourceLimitError")
    assert len(rep.failures) == 1


def test_segment_counts_match_region_counts():
    eigs = np.stack([sample_spectrum(64, 1, r).eigenvalues for r in range(20)])
    for j, theta in ((2, 1.0), (3, math.pi), (5, 2 * math.pi)):
        assert np.array_equal(ex.segment_counts(eigs, 64, j, theta), count_matrix(eigs, InitialSegment(j, theta, 64)))


def test_counting_concentration_and_negative_control():
    good = ex.verify_counting_concentration(SMALL)
    assert not good.flagged()
    assert all(0 <= r["value"] <= 1 and r["lo"] <= r["value"] <= r["hi"] for r in good.rows)
    bad = ex.verify_counting_concentration(SMALL, corrupt_shift=30)
    assert bad.flagged()


def test_counting_t_zero_passes():
    counts = {(2, math.pi): np.full(50, 100)}
    tab = ex.counting_table(counts, 64, [0.0], 0.99)
    assert all(r["status"] != "fail" for r in tab.rows)
    assert tab.rows[0]["bound"] >= 1


def test_deviation_on_lattice_is_zero():
    n = 256
    eigs = np.tile(lattice(n, n), (3, 1))
    tab = ex.deviation_table(eigs, n, (4, 8), (2.0, 4.0, 10.0), 0.99)
    assert all(r["count"] == 0 for r in tab.rows if r["table"] == "eigen-deviation")


def test_deviation_small_run():
    tab = ex.verify_eigenvalue_deviation(SMALL)
    dev = [r for r in tab.rows if r["table"] == "eigen-deviation"]
    assert all(r["status"] == "info" for r in dev)
    assert all(r["bound"] == "" for r in dev if r["x"] < 9)
    assert tab.fits["monotone"] == {4: True, 8: True}
    assert any(r["table"] == "eigen-scaling" for r in tab.rows)


def test_edge_moment():
    assert ex.edge_moment_bound(1, 64) == pytest.approx(4 + math.sqrt(2 / 64) * math.gamma(1.5))
    assert ex.edge_moment_bound(1, 64) == pytest.approx(4.157, abs=1e-3)
    assert ex.edge_moment_bound(2, 64) == pytest.approx(16 + (4 / 3) * (2 / 64))
    tab = ex.verify_edge_moment(SMALL)
    assert not tab.flagged()
    tail = [r for r in tab.rows if r["table"] == "edge-tail"]
    assert tail and tail[0]["count"] == 0


def test_analytics_small():
    rows = ex.verify_analytics(SMALL)
    assert rows and all(e.status == "pass" for e in rows)
    tv1 = next(e for e in rows if e.params == "n=1" and "1/(e sqrt n)" in e.anchor)
    assert tv1.value == pytest.approx(math.exp(-1), abs=1e-9) and abs(tv1.margin) < 1e-9


def _full(cfg):
    return ex.CampaignReport(
        rates=ex.run_rate_experiment(cfg),
        deviations=[ex.verify_counting_concentration(cfg), ex.verify_eigenvalue_deviation(cfg),
                    ex.verify_edge_moment(cfg)],
        ledger=ex.verify_analytics(cfg))


def test_report_deterministic_across_threads(tmp_path):
    cfg = SMALL.replace(counting_reps=40, deviation_reps=4, edge_reps=10)
    dirs = []
    for i, threads in enumerate((1, 3, 1)):
        ex.cached_spectrum.cache_clear()
        d = tmp_path / f"run{i}"
        ex.emit_report(_full(cfg.replace(threads=threads)), d)
        dirs.append(d)
    for name in ("rates.csv", "deviations.csv", "ledger.csv", "plots.gp"):
        for d in dirs[1:]:
            assert filecmp.cmp(dirs[0] / name, d / name, shallow=False), name


def test_empty_report_headers_only(tmp_path):
    paths = ex.emit_report(ex.CampaignReport(), tmp_path)
    assert (tmp_path / "rates.csv").read_text() == ",".join(ex.RATE_COLUMNS) + "\n"
    assert (tmp_path / "deviations.csv").read_text() == ",".join(ex.DEVIATION_COLUMNS) + "\n"
    assert (tmp_path / "ledger.csv").read_text() == ",".join(ex.LEDGER_COLUMNS) + "\n"
    assert len(paths) == 4


def test_json_and_csv_agree(tmp_path):
    rep = ex.CampaignReport(rates=ex.run_rate_experiment(SMALL.replace(reps=2)))
    ex.emit_report(rep, tmp_path / "c", "csv")
    ex.emit_report(rep, tmp_path / "j", "json")
    header, rows = ex.read_rates_csv(tmp_path / "c" / "rates.csv")
    doc = json.loads((tmp_path / "j" / "rates.json").read_text())
    assert doc["columns"] == header
    assert len(rows) == len(doc["records"])
    for crow, jrow in zip(rows, doc["records"]):
        for c, j in zip(crow, jrow):
            if isinstance(j, (int, float)) and not isinstance(j, bool):
                assert float(c) == float(j)
            else:
                assert c == str(j)
    with pytest.raises(ex.ConfigError):
        ex.emit_report(rep, tmp_path / "x", "xml")


def test_report_failed_flag():
    rep = ex.CampaignReport(ledger=[ex.LedgerEntry("a", "", 1.0, 0.0, "fail", -1.0)])
    assert rep.failed()
    assert not ex.CampaignReport(ledger=[ex.LedgerEntry("a", "", 1.0, 0.0, "info", -1.0)]).failed()

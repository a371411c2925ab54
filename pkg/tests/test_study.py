import csv
import io
import json
from fractions import Fraction

import numpy as np
import pytest

from oscilla.cli import main
from oscilla.geometry import PeriodicProfile, SourceFunction
from oscilla.study import (
    CSV_HEADER,
    ErrorRecord,
    StudyConfig,
    StudyReport,
    emit_report,
    fit_slope,
    parse_config,
    parse_eps,
    parse_profile,
    parse_source,
    prepare,
    report_to_csv,
    report_to_json,
    run_case,
    run_sweep_and_fit,
)

SMALL = """
# quick sweep
profile = cosine(2.0, [1.0], 1.0)
source = cospoly([0.0, 1.0])
eps = 1/4, 1/8
m = 8
n = 4
"""


def test_parse_eps():
    assert parse_eps("1/16") == Fraction(1, 16)
    assert parse_eps("0.0625") == Fraction(1, 16)
    assert parse_eps(0.125) == Fraction(1, 8)


def test_parse_profile_and_source():
    p = parse_profile("cosine(2.0, [1.0, 0.25], 0.5)")
    assert (p.a0, p.amplitudes, p.period) == (2.0, (1.0, 0.25), 0.5)
    assert parse_profile("constant(1.5, 1.0)").family == "constant"
    assert parse_profile(p.describe()) == p
    s = parse_source("cospoly([1.0, 0.0, 2.0])")
    assert s.coefficients == (1.0, 0.0, 2.0)
    assert parse_source(s.describe()) == s
    for bad in ("sine(1)", "cosine"):
        with pytest.raises(ValueError):
            parse_profile(bad)
    for bad in ("cospoly([1, 2]", "cosine(2.0, [1.0])"):
        with pytest.raises(ValueError):
            parse_source(bad)


def test_parse_config():
    cfg = parse_config(SMALL + "slope_min = 0.4\nrefinement_check = yes\n")
    assert cfg.eps == (Fraction(1, 4), Fraction(1, 8))
    assert (cfg.m, cfg.n) == (8, 4)
    assert cfg.thresholds.slope_min == 0.4
    assert cfg.refinement_check is True
    with pytest.raises(ValueError, match="unknown key"):
        parse_config("colour = red")
    with pytest.raises(ValueError, match="key = value"):
        parse_config("just words")


def test_config_validation():
    with pytest.raises(ValueError):
        StudyConfig(eps=())
    with pytest.raises(ValueError):
        StudyConfig(eps=("1/8", "1/4"))
    with pytest.raises(ValueError):
        StudyConfig(eps=("1/3.5",))  # not a whole number of periods
    with pytest.raises(ValueError):
        StudyConfig(m=1)


def test_default_config_file_matches_defaults():
    cfg = parse_config(open("configs/default.cfg").read())
    assert cfg.echo() == StudyConfig().echo()


@pytest.fixture(scope="module")
def small_report():
    return run_sweep_and_fit(parse_config(SMALL))


def test_records(small_report):
    recs = small_report.records
    assert [r.eps for r in recs] == [0.25, 0.125]
    for r in recs:
        assert r.finite()
        assert r.e2_h1 < r.e1_h1 < r.e0_h1
        assert r.solve["converged"]
        assert r.w_h1 <= r.f_l2
    assert set(small_report.slopes) == {"e1_h1", "e2_h1"}
    assert small_report.fit_error is None


def test_constant_source_has_zero_error():
    cfg = StudyConfig(source=SourceFunction((2.0,)), eps=("1/4",), m=8, n=4)
    rec = run_case(cfg, cfg.eps[0], prepare(cfg))
    for e in (rec.e0_l2, rec.e0_h1, rec.e1_h1, rec.e2_h1):
        assert e <= 1e-7


def test_flat_profile_error_is_discretisation_only():
    # with g constant the thin solution is x2-independent and equals w0 up to FE error
    errs = []
    for m in (8, 16, 32):
        cfg = StudyConfig(profile=PeriodicProfile.constant(1.0, 1.0), eps=("1/4",), m=m, n=2)
        errs.append(run_case(cfg, cfg.eps[0], prepare(cfg)).e0_h1)
    assert errs[0] / errs[1] >= 1.5 and errs[1] / errs[2] >= 1.5


def test_fit_slope():
    eps = np.array([1 / 8, 1 / 16, 1 / 32, 1 / 64])
    assert fit_slope(eps, 3 * np.sqrt(eps)) == pytest.approx(0.5, abs=1e-12)
    assert fit_slope(eps[:2], [4.0, 2.0]) == pytest.approx(1.0, abs=1e-12)
    rng = np.random.default_rng(0)
    noisy = eps * np.exp(rng.normal(0, 0.01, 4))
    assert fit_slope(eps, noisy) == pytest.approx(1.0, abs=0.05)
    with pytest.raises(ValueError):
        fit_slope([0.1], [1.0])
    with pytest.raises(ValueError):
        fit_slope(eps, [1, 0, 1, 1])


def test_single_eps_reports_fit_error():
    rep = run_sweep_and_fit(StudyConfig(eps=("1/4",), m=8, n=4))
    assert rep.slopes == {}
    assert "two" in rep.fit_error
    assert "second_order_rate" not in rep.acceptance


def test_csv_output(small_report):
    rows = list(csv.reader(io.StringIO(report_to_csv(small_report))))
    assert rows[0] == CSV_HEADER
    assert len(rows) == 3
    assert float(rows[1][0]) == 0.25 and int(rows[1][1]) == small_report.records[0].dof
    empty = StudyReport({}, {}, [], {}, {}, {})
    assert report_to_csv(empty) == ",".join(CSV_HEADER) + "\n"


def test_json_round_trip(small_report, tmp_path):
    path = tmp_path / "r.json"
    emit_report(small_report, "json", path)
    data = json.loads(path.read_text())
    assert data["records"][1]["e2_h1"] == small_report.records[1].e2_h1
    assert data["config"]["eps"] == ["1/4", "1/8"]
    assert set(data["acceptance"]) == set(small_report.acceptance)
    with pytest.raises(ValueError):
        emit_report(small_report, "xml", tmp_path / "r.xml")


def test_reports_are_reproducible():
    a = run_sweep_and_fit(parse_config(SMALL))
    b = run_sweep_and_fit(parse_config(SMALL + "jobs = 2\n"))
    assert report_to_csv(a, timings=False) == report_to_csv(b, timings=False)
    ja, jb = report_to_json(a, timings=False), report_to_json(b, timings=False)
    assert ja.replace('"jobs": 2', "") == jb.replace('"jobs": 2', "")


def test_out_of_domain_eps_rejected():
    with pytest.raises(ValueError):
        StudyConfig(eps=("0.3",))


@pytest.fixture
def cfg_file(tmp_path):
    p = tmp_path / "small.cfg"
    p.write_text(SMALL)
    return p


def test_cli_study(cfg_file, tmp_path, capsys):
    out_csv, out_json = tmp_path / "a.csv", tmp_path / "a.json"
    code = main(["study", "--config", str(cfg_file), "--out-csv", str(out_csv),
                 "--out-json", str(out_json), "--no-timings"])
    assert code == 0
    text = capsys.readouterr().out
    assert text.startswith(",".join(CSV_HEADER))
    assert "slope e2_h1" in text
    assert out_csv.read_text() == report_to_csv(run_sweep_and_fit(parse_config(SMALL)), timings=False)
    first = out_json.read_bytes()
    main(["study", "--config", str(cfg_file), "--out-json", str(out_json), "--no-timings"])
    assert out_json.read_bytes() == first


def test_cli_overrides(cfg_file, capsys):
    assert main(["study", "--config", str(cfg_file), "--eps", "1/4,1/8,1/16", "--m", "6"]) == 0
    rows = capsys.readouterr().out.splitlines()
    assert rows[3].startswith("0.0625,")


def test_cli_cell(cfg_file, capsys):
    assert main(["cell", "--config", str(cfg_file)]) == 0
    diag = json.loads(capsys.readouterr().out)
    assert 0 < diag["r_flux"] <= 1
    assert diag["m"] == 8


def test_cli_check_exit_code(cfg_file, capsys):
    # two coarse eps values cannot meet every acceptance rule
    assert main(["study", "--config", str(cfg_file), "--check"]) == 1
    out = capsys.readouterr().out
    assert "FAIL" in out and "mesh_independence" in out and "r_richardson" in out


class _SineProfile(PeriodicProfile):
    """2 + sin(2 pi y): same shape as the default profile, shifted a quarter period."""

    def g(self, y):
        return self.a0 + self.amplitudes[0] * np.sin(2 * np.pi * np.asarray(y, float))

    def dg(self, y):
        return 2 * np.pi * self.amplitudes[0] * np.cos(2 * np.pi * np.asarray(y, float))


def test_even_profile_kills_lateral_corrector_flux(cosine_cell):
    # X is odd about y = 0 for an even g, so the lateral mismatch eps X w0'' vanishes
    # at x1 = 0, 1; this is what lifts the e2 rate above the generic sqrt(eps)
    mesh = cosine_cell.mesh
    left = mesh.node_index(0, np.arange(mesh.layers + 1))
    assert np.abs(cosine_cell.X[left]).max() <= 1e-10 * np.abs(cosine_cell.X).max()


@pytest.mark.slow
def test_symmetry_broken_profile_rate():
    profile = _SineProfile(2.0, (1.0,), 1.0)
    rep = run_sweep_and_fit(StudyConfig(profile=profile))
    assert 0.45 <= rep.slopes["e2_h1"] <= 1.2
    assert 0.45 <= rep.slopes["e1_h1"] <= 1.2

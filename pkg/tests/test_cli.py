import csv
import io
import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from budget_threshold.allocator import risk_cost_sigma
from budget_threshold.backtest import format_number, read_series_csv
from budget_threshold.cli import main
from budget_threshold.ged_dist import GedParams, variance

DATA = Path(__file__).parent / "data"


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def reformat_csv(text):
    """Parse an emitted CSV and write it back with the same number format."""
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    for i, row in enumerate(csv.reader(io.StringIO(text))):
        if i == 0:
            w.writerow(row)
            continue
        cells = []
        for cell in row:
            try:
                v = float(cell)
            except ValueError:
                cells.append(cell)
                continue
            cells.append(cell if cell.lstrip("-").isdigit() else format_number(v))
        w.writerow(cells)
    return out.getvalue()


class TestTau:
    def test_default_grid(self, capsys):
        code, out, _ = run(capsys, "tau")
        assert code == 0
        table = rows(out)
        assert len(table) == 101
        assert (table[0]["kappa"], table[0]["tau"]) == ("0.5", "0.39894228")
        assert float(table[0]["tau"]) == pytest.approx(0.3989423, abs=1e-7)
        assert (table[-1]["kappa"], table[-1]["tau"]) == ("1", "1")
        taus = [float(r["tau"]) for r in table]
        assert all(b > a for a, b in zip(taus, taus[1:]))

    def test_single_point(self, capsys):
        code, out, _ = run(capsys, "tau", "--kappa", "0.75")
        assert code == 0 and len(rows(out)) == 1

    def test_bad_grid(self, capsys):
        code, _, err = run(capsys, "tau", "--kappa-step", "0")
        assert code == 1 and "step" in err
        code, _, err = run(capsys, "tau", "--kappa", "5")
        assert code == 1 and "kappa" in err


class TestFigureData:
    def test_utility_curve(self, capsys):
        code, out, _ = run(capsys, "utility-curve", "--beta", "0.5", "1", "--w-min", "-2", "--w-max", "2", "--w-num", "41")
        assert code == 0
        table = rows(out)
        assert len(table) == 82
        for r in table:
            beta, w, u = float(r["beta"]), float(r["wealth"]), float(r["utility"])
            assert u == (beta if w >= beta else w)
        knot = [r for r in table if float(r["wealth"]) == 1.0 and float(r["beta"]) == 1.0]
        assert float(knot[0]["utility"]) == 1.0

    def test_utility_curve_empty_range(self, capsys):
        code, _, _ = run(capsys, "utility-curve", "--w-num", "0")
        assert code == 1

    def test_risk_scaling(self, capsys):
        code, out, _ = run(capsys, "risk-scaling")
        assert code == 0
        table = rows(out)
        factor = np.array([float(r["risk_cost_factor"]) for r in table])
        assert factor[0] == pytest.approx(float(table[0]["normal_reference"]), rel=1e-8)
        assert factor[0] == pytest.approx(0.3989, abs=1e-4)
        assert factor[-1] == pytest.approx(0.35355, abs=1e-5)
        assert np.all((factor >= 0.35) & (factor <= 0.40))

    def test_holding_curve(self, capsys):
        code, out, _ = run(capsys, "holding-curve", "--k", "0.4", "--x-num", "801", "--x-min", "-2", "--x-max", "2")
        assert code == 0
        table = rows(out)
        x = np.array([float(r["alpha_over_s"]) for r in table])
        y = np.array([float(r["relative_holding"]) for r in table])
        np.testing.assert_array_equal(y, -y[::-1])
        assert set(np.unique(y)) == {-1.0, 0.0, 1.0}
        assert y[np.argmin(np.abs(x))] == 0.0
        assert np.all(y[x > 0.4 + 1e-9] == 1.0) and np.all(y[np.abs(x) <= 0.4] == 0.0)

    def test_holding_curve_bad_range(self, capsys):
        code, _, _ = run(capsys, "holding-curve", "--x-min", "1", "--x-max", "-1")
        assert code == 1


class TestAllocate:
    def test_parametric(self, capsys):
        code, out, _ = run(capsys, "allocate", "--alpha", "0.05", "--sigma", "0.01", "--kappa", "0.5", "--limit", "100")
        assert code == 0
        rec = rows(out)[0]
        assert rec["holding"] == "100" and rec["rule"] == "parametric"

    def test_negative_and_zero(self, capsys):
        _, out, _ = run(capsys, "allocate", "--alpha", "-0.05", "--sigma", "0.01", "--kappa", "0.5", "--limit", "100")
        assert rows(out)[0]["holding"] == "-100"
        _, out, _ = run(capsys, "allocate", "--alpha", "0", "--sigma", "0.01", "--kappa", "0.75", "--limit", "1")
        assert rows(out)[0]["holding"] == "0"

    def test_semi_empirical_json(self, capsys):
        code, out, _ = run(capsys, "--format", "json", "allocate", "--alpha", "0.05", "--s", "0.1",
                           "--kappa", "0.75", "--limit", "1", "--k", "0.4")
        assert code == 0
        rec = json.loads(out)
        assert rec["holding"] == 1.0 and rec["rule"] == "semi_empirical"
        assert rec["risk_cost"] == pytest.approx(0.04)

    def test_domain_error_exit_code(self, capsys):
        code, out, err = run(capsys, "allocate", "--alpha", "0.05", "--sigma", "-1", "--kappa", "0.5", "--limit", "1")
        assert code == 1 and out == "" and "sigma" in err

    def test_requires_one_scale(self):
        with pytest.raises(SystemExit):
            main(["allocate", "--alpha", "0.1", "--sigma", "1", "--s", "1", "--kappa", "0.5", "--limit", "1"])


class TestEu:
    @pytest.mark.parametrize("h,alpha,sigma,kappa", [(1, 0.1, 0.2, 0.5), (-10, 0.02, 0.01, 1.0), (0.1, -0.05, 0.2, 0.75)])
    def test_oracle_difference(self, capsys, h, alpha, sigma, kappa):
        code, out, _ = run(capsys, "eu", "--h", str(h), "--alpha", str(alpha), "--sigma", str(sigma),
                           "--kappa", str(kappa), "--oracle")
        assert code == 0
        assert float(rows(out)[0]["abs_diff"]) < 1e-8

    def test_zero_holding(self, capsys):
        _, out, _ = run(capsys, "eu", "--h", "0", "--alpha", "0.1", "--sigma", "0.2", "--kappa", "0.5", "--oracle")
        rec = rows(out)[0]
        assert rec["closed_form"] == "0" and rec["quadrature"] == "0"

    def test_boundary(self, capsys):
        alpha = risk_cost_sigma(0.2, 0.75)
        _, out, _ = run(capsys, "eu", "--h", "1", "--alpha", repr(alpha), "--sigma", "0.2", "--kappa", "0.75")
        assert float(rows(out)[0]["closed_form"]) == 0.0

    def test_monte_carlo_uses_seed(self, capsys):
        args = ["eu", "--h", "1", "--alpha", "0.1", "--sigma", "0.2", "--kappa", "0.5", "--mc", "5000"]
        _, a, _ = run(capsys, "--seed", "1", *args)
        _, b, _ = run(capsys, *args, "--seed", "1")
        _, c, _ = run(capsys, *args, "--seed", "2")
        assert a == b != c


class TestSimulate:
    def test_rows_and_determinism(self, capsys, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        args = ["simulate", "--mu", "0.001", "--sigma", "0.01", "--kappa", "0.75", "--n", "500", "--seed", "9"]
        assert main([*args, "--out", str(a)]) == 0
        assert main([*args, "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()
        assert len(read_series_csv(a)) == 500

    def test_reproduces_bundled_series(self, capsys, tmp_path):
        out = tmp_path / "s.csv"
        main(["simulate", "--mu", "0.0004", "--sigma", "0.006", "--kappa", "0.75", "--n", "1500",
              "--seed", "20261019", "--out", str(out)])
        assert out.read_bytes() == (DATA / "golden_series.csv").read_bytes()

    @pytest.mark.slow
    def test_sample_variance(self, capsys, tmp_path):
        out = tmp_path / "big.csv"
        main(["simulate", "--mu", "0", "--sigma", "0.01", "--kappa", "0.75", "--n", "1000000",
              "--seed", "4", "--out", str(out)])
        r = read_series_csv(out).returns
        d = r - r.mean()
        se = math.sqrt((np.mean(d**4) - np.mean(d**2) ** 2) / r.size)
        assert abs(r.var(ddof=1) - variance(GedParams(0, 0.01, 0.75))) < 3 * se

    def test_with_moments_json(self, capsys):
        code, out, _ = run(capsys, "--format", "json", "simulate", "--mu", "0.001", "--sigma", "0.01",
                           "--kappa", "0.5", "--n", "3", "--with-moments")
        doc = json.loads(out)
        assert code == 0 and len(doc) == 3 and doc[0]["s"] == 0.01


class TestBacktestCommands:
    def test_golden_backtest(self, tmp_path):
        rec, summ = tmp_path / "r.csv", tmp_path / "s.txt"
        code = main(["backtest", str(DATA / "golden_series.csv"), "--k", "0.1", "--limit", "2", "--window", "60",
                     "--out", str(rec), "--summary", str(summ)])
        assert code == 0
        assert rec.read_bytes() == (DATA / "golden_records.csv").read_bytes()
        assert summ.read_bytes() == (DATA / "golden_summary.txt").read_bytes()

    def test_golden_calibrate(self, tmp_path):
        sweep, summ = tmp_path / "k.csv", tmp_path / "b.txt"
        code = main(["calibrate", str(DATA / "golden_series.csv"), "--window", "60", "--k-grid", "0.02:0.3:0.02",
                     "--out", str(sweep), "--summary", str(summ)])
        assert code == 0
        assert sweep.read_bytes() == (DATA / "golden_sweep.csv").read_bytes()
        assert summ.read_bytes() == (DATA / "golden_calibration.txt").read_bytes()
        assert sweep.read_text().splitlines()[0] == "k,total_pnl,total_realized_utility,trades"

    def test_infinite_k_flat(self, capsys, tmp_path):
        summ = tmp_path / "s.txt"
        code, out, _ = run(capsys, "backtest", str(DATA / "golden_series.csv"), "--k", "inf", "--window", "60",
                           "--summary", str(summ))
        assert code == 0
        assert all(r["position"] == "0" for r in rows(out))
        assert "total_pnl = 0\n" in summ.read_text()

    def test_malformed_row(self, capsys, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("timestamp,return\n0,0.01\n1,0.02\n2,oops\n")
        code, out, err = run(capsys, "backtest", str(bad), "--window", "2")
        assert code == 1 and "line 4" in err

    def test_missing_file(self, capsys, tmp_path):
        code, _, err = run(capsys, "backtest", str(tmp_path / "nope.csv"))
        assert code == 1 and "error" in err

    def test_insufficient_data(self, capsys, tmp_path):
        short = tmp_path / "short.csv"
        short.write_text("timestamp,return\n0,0.01\n1,0.02\n")
        code, _, err = run(capsys, "backtest", str(short), "--window", "5")
        assert code == 1

    def test_bad_k_grid(self, capsys):
        code, _, err = run(capsys, "calibrate", str(DATA / "golden_series.csv"), "--k-grid", "a:b")
        assert code == 1 and "grid" in err

    def test_json_report(self, capsys):
        code, out, _ = run(capsys, "--format", "json", "backtest", str(DATA / "golden_series.csv"),
                           "--k", "0.1", "--limit", "2", "--window", "60")
        doc = json.loads(out)
        assert code == 0
        assert doc["summary"]["periods"] == len(doc["records"]) == 1439
        golden = (DATA / "golden_summary.txt").read_text()
        assert f"trades = {doc['summary']['trades']}\n" in golden


class TestRoundTrip:
    @pytest.mark.parametrize("argv", [
        ["tau"],
        ["risk-scaling"],
        ["holding-curve"],
        ["utility-curve"],
        ["eu", "--h", "1", "--alpha", "0.1", "--sigma", "0.2", "--kappa", "0.5", "--oracle"],
        ["allocate", "--alpha", "0.05", "--sigma", "0.01", "--kappa", "0.5", "--limit", "100"],
        ["backtest", str(DATA / "golden_series.csv"), "--k", "0.1", "--window", "60"],
        ["calibrate", str(DATA / "golden_series.csv"), "--window", "60"],
    ])
    def test_csv_and_json(self, capsys, argv):
        _, out, _ = run(capsys, *argv)
        assert reformat_csv(out) == out
        _, out, _ = run(capsys, "--format", "json", *argv)
        assert json.dumps(json.loads(out), indent=1) + "\n" == out

    def test_series_file(self):
        text = (DATA / "golden_series.csv").read_text()
        assert reformat_csv(text) == text


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "budget_threshold", "tau", "--kappa", "1.0"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout == "kappa,tau\n1,1\n"

import math
import subprocess
import sys

import pytest

from covshift.cli import main
from covshift.experiments import SweepRow
from covshift.output import CSV_HEADER, emit_csv, emit_svg, format_csv, read_csv, render_svg


def _row(mode="supervised", size=100, risk=0.1, error=""):
    return SweepRow(mode, size, 0.01, 0.01, risk, 0.0, 0, "oracle", error)


def test_empty_csv_is_header_only(tmp_path):
    path = tmp_path / "out.csv"
    emit_csv([], path)
    assert path.read_text() == ",".join(CSV_HEADER) + "\n"
    assert CSV_HEADER == "mode,sample_size,gamma0,gammaM,mean_risk,stderr_risk,n_repeats,evaluator".split(",")


def test_csv_round_trip_and_precision(tmp_path):
    rows = [_row(risk=1 / 3), _row("pretrain", 200, 2 / 3)]
    path = tmp_path / "out.csv"
    emit_csv(rows, path)
    assert "0.333333333333333" in path.read_text()
    back = read_csv(path)
    assert [r.mode for r in back] == ["supervised", "pretrain"]
    assert back[0].mean_risk == pytest.approx(1 / 3, rel=1e-14)


def test_error_column_only_when_needed():
    assert "error" not in format_csv([_row()]).splitlines()[0]
    text = format_csv([_row(), _row(size=5, risk=math.nan, error='bad "gamma"')])
    assert text.splitlines()[0].endswith(",error")
    assert '"bad ""gamma"""' in text


def test_read_csv_rejects_other_files(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_csv(path)


def test_single_row_svg_has_one_marker():
    svg = render_svg([_row()])
    assert svg.count('class="marker"') == 1
    assert "sample size" in svg and "excess risk" in svg


def test_svg_series_per_mode(tmp_path):
    rows = [_row(m, s, 1.0 / s) for m in ("pretrain", "supervised") for s in (10, 100, 1000)]
    path = tmp_path / "f.svg"
    emit_svg(rows, path, title="a < b")
    svg = path.read_text()
    assert svg.count("<polyline") == 2
    assert svg.count('class="marker"') == 6
    assert "a &lt; b" in svg
    with pytest.raises(ValueError):
        render_svg([])


def test_unwritable_path_raises(tmp_path):
    with pytest.raises(OSError):
        emit_csv([_row()], tmp_path / "missing" / "out.csv")


def test_cli_gen_instance_and_bounds(tmp_path, capsys):
    path = tmp_path / "inst.txt"
    assert main(["gen-instance", "--instance", "pk:2:6", "--out", str(path)]) == 0
    assert main(["bounds", "--instance", str(path), "--m", "200", "--n", "50", "--gamma0", "0.02", "--gammaM", "0.02"]) == 0
    out = capsys.readouterr().out
    assert "bias_upper = " in out and "oracle_bias = " in out


def test_cli_sweep_and_plot(tmp_path):
    csv_path = tmp_path / "s.csv"
    svg_path = tmp_path / "s.svg"
    args = ["sweep", "--instance", "pk:2:20", "--mode", "supervised", "--samples", "50,100", "--out", str(csv_path)]
    assert main(args) == 0
    assert len(csv_path.read_text().splitlines()) == 3
    assert main(["plot", str(csv_path), "--out", str(svg_path)]) == 0
    assert svg_path.read_text().count('class="marker"') == 2


def test_cli_tune(capsys):
    assert main(["tune", "--instance", "pk:2:20", "--mode", "pretrain", "--samples", "100"]) == 0
    out = capsys.readouterr().out
    assert "gamma0 = " in out and "gammaM = 0" in out


def test_cli_config_file(tmp_path, capsys):
    cfg = tmp_path / "c.txt"
    cfg.write_text("instance_spec = pk:2:20\nmode = pretrain\nsample_grid = 100\n")
    assert main(["sweep", "--config", str(cfg)]) == 0
    assert capsys.readouterr().out.count("\n") == 2


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["sweep", "--instance", "pk:0:5", "--mode", "pretrain", "--samples", "10"]) == 1
    assert main(["gen-instance", "--instance", str(tmp_path / "nope.txt")]) == 2
    assert main(["gen-instance", "--instance", "pk:2:5", "--out", str(tmp_path / "no" / "x.txt")]) == 2
    with pytest.raises(SystemExit) as err:
        main(["sweep", "--mode", "bogus"])
    assert err.value.code == 1
    capsys.readouterr()


def test_cli_example1(capsys):
    assert main(["example1", "--eps", "1/4", "--cap", "100000"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("eps,")
    assert "# supervised_exponent" in out


def test_console_script_runs():
    proc = subprocess.run([sys.executable, "-m", "covshift.cli", "verify", "--repeats", "100"],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stdout + proc.stderr
    assert proc.stdout.count("PASS") == 5

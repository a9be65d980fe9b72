import json

import pytest

import cli
from data_utils import read_coefficient_cache


@pytest.fixture
def cache_dir(tmp_path, monkeypatch):
    path = tmp_path / "cache"
    monkeypatch.setenv(cli.CACHE_DIR_ENV, str(path))
    return path


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr().out
    return code, out.splitlines()


def test_qexp_g_series(cache_dir, capsys):
    code, lines = run(["qexp", "g-series", "--terms", "20", "--quiet"], capsys)
    assert code == 0
    assert lines[0] == "qseries min_exp=1 trunc=21"
    assert lines[1:4] == ["1 1", "4 -8", "7 20"]


def test_qexp_eta_delta(cache_dir, capsys):
    code, lines = run(["qexp", "eta", "1:24", "--terms", "3", "--quiet"], capsys)
    assert code == 0
    assert lines[1:] == ["1 1", "2 -24", "3 252"]


def test_qexp_jm_zero(cache_dir, capsys):
    code, lines = run(["qexp", "jm", "0", "--terms", "1", "--quiet"], capsys)
    assert code == 0
    assert lines == ["qseries min_exp=0 trunc=1", "0 1"]


def test_qexp_jm_with_fewer_terms_than_m(cache_dir, capsys):
    code, lines = run(["qexp", "jm", "2", "--terms", "2", "--quiet"], capsys)
    assert code == 0
    assert lines == ["qseries min_exp=-2 trunc=0", "-2 1"]


def test_qexp_writes_file(cache_dir, tmp_path, capsys):
    out = tmp_path / "j.txt"
    code, _ = run(["qexp", "j", "--terms", "4", "--out", str(out), "--quiet"], capsys)
    assert code == 0
    assert out.read_text().splitlines()[1:] == ["-1 1", "0 744", "1 196884"]


def test_qexp_bad_eta_spec_is_an_error(cache_dir, capsys):
    code = cli.main(["qexp", "eta", "1:1", "--terms", "3", "--quiet"])
    assert code == cli.EXIT_ERROR
    assert "error:" in capsys.readouterr().err


def test_run_config_is_dumped(cache_dir, capsys):
    run(["qexp", "delta", "--terms", "2", "--quiet", "--threads", "3"], capsys)
    config = json.loads((cache_dir / cli.RUN_CONFIG_NAME).read_text())
    assert config["config"]["threads"] == 3
    assert "seed" not in config["config"]
    assert config["config"]["precision_bits"] == 128
    assert config["command"]["series"] == "delta"


def test_cache_dir_flag_overrides_env(cache_dir, tmp_path, capsys):
    other = tmp_path / "other"
    run(["qexp", "delta", "--terms", "2", "--quiet", "--cache-dir", str(other)], capsys)
    assert (other / cli.RUN_CONFIG_NAME).exists()
    assert not (cache_dir / cli.RUN_CONFIG_NAME).exists()


def test_poincare_weak_table_and_cache(cache_dir, capsys):
    code, lines = run(
        ["poincare", "--sign", "-", "--m", "1", "--k", "4", "--level", "9", "--n-max", "2", "--c-max", "1350",
         "--quiet"],
        capsys,
    )
    assert code == 0
    assert lines[0] == "# weak m=1 k=4 N=9"
    assert lines[2].split()[0] == "2"
    assert abs(float(lines[2].split()[1]) - 2) < 1e-3
    cached = read_coefficient_cache(cache_dir / "weak_m1_k4_N9.txt")
    assert sorted(cached.values) == [1, 2]
    assert cached.values[2].contains(2)


def test_poincare_maass_rationalize(cache_dir, capsys):
    code, lines = run(
        ["poincare", "--maass", "--m", "1", "--k", "4", "--level", "9", "--n-max", "2", "--c-max", "1350",
         "--rationalize", "--quiet"],
        capsys,
    )
    assert code == 0
    assert lines[1].split()[:2] == ["0", "0.0"]
    assert lines[-1].endswith("= -2/8 = -1/4")


def test_poincare_weight_two_banner(cache_dir, capsys):
    code, lines = run(
        ["poincare", "--m", "1", "--k", "2", "--level", "11", "--n-max", "1", "--c-max", "22", "--quiet"], capsys
    )
    assert code == 0
    assert lines[0].startswith("uncertified")


def test_poincare_c_max_below_level(cache_dir, capsys):
    code = cli.main(["poincare", "--m", "1", "--k", "4", "--level", "9", "--n-max", "1", "--c-max", "3", "--quiet"])
    assert code == cli.EXIT_ERROR


def test_verify_cm_negative_control(cache_dir, capsys):
    code, lines = run(["verify", "cm", "--D", "-3", "--series", "e4", "--quiet"], capsys)
    assert code == 1
    assert any(line.startswith("CHECK cm fail") for line in lines)


def test_verify_hecke_and_report_file(cache_dir, tmp_path, capsys):
    report = tmp_path / "hecke.txt"
    code, _ = run(["verify", "hecke", "--report", str(report), "--quiet"], capsys)
    assert code == 0
    assert "CHECK hecke pass c(2^4) = 64: 64" in report.read_text()


def test_verify_padic_writes_csv(cache_dir, tmp_path, capsys):
    csv_path = tmp_path / "density.csv"
    code, _ = run(["verify", "padic", "--terms", str(3 ** 8), "--csv", str(csv_path), "--quiet"], capsys)
    assert code == 0
    assert csv_path.read_text().splitlines()[0] == "X,b,density"


def test_cache_check_reports_line(cache_dir, tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("qseries min_exp=0 trunc=2\n0 1\nzap\n")
    code, lines = run(["cache", "check", str(bad), "--quiet"], capsys)
    assert code == 1
    assert lines == [f"{bad}:3: expected '<n> <numerator/denominator>', got 'zap'"]


def test_cache_show_and_dump_kloosterman(cache_dir, tmp_path, capsys):
    dump = tmp_path / "k.txt"
    code, _ = run(
        ["cache", "dump-kloosterman", str(dump), "--level", "9", "--n-max", "2", "--c-max", "27", "--quiet"], capsys
    )
    assert code == 0
    assert len(dump.read_text().splitlines()) == 6
    code, lines = run(["cache", "check", str(dump), "--quiet"], capsys)
    assert code == 0 and lines == [f"{dump}: ok (6 entries)"]
    code, lines = run(["cache", "show", str(dump), "--quiet"], capsys)
    assert code == 0 and lines[0].startswith("K(8,1,9) = ")

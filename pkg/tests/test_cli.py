import csv
import io

import pytest

from cogrelay import cli
from cogrelay.config import parse_config
from cogrelay.scenarios import preset, preset_ids

FAST = ["--sweep", "2, 4", "--frames", "5000", "--seed", "7"]


def _rows(text):
    body = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(body))))


def _run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_fig5_outage_columns(tmp_path, capsys):
    out = tmp_path / "fig5.csv"
    code, _, err = _run(["run", "--preset", "fig5", "--methods", "closed,mc", "--out", str(out)]
                        + FAST, capsys)
    assert code == cli.EXIT_OK
    assert "1e6" in err
    raw = out.read_bytes()
    assert b"\r" not in raw
    text = raw.decode()
    assert "# seed: 7" in text and "# frames: 5000" in text and "# mc_block: 4096" in text
    rows = _rows(text)
    assert list(rows[0]) == ["N_R", "outage_closed", "outage_mc", "outage_mc_stderr",
                             "outage_floor_mu", "outage_floor_pa"]
    assert [r["N_R"] for r in rows] == ["2", "4"]
    first = rows[0]
    assert float(first["outage_closed"]) == pytest.approx(0.1103045, rel=1e-5)
    assert abs(float(first["outage_mc"]) - float(first["outage_closed"])) < \
        4 * float(first["outage_mc_stderr"])


def test_rerun_is_byte_identical(tmp_path, capsys):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for p, workers in zip(paths, ("1", "2")):
        code, _, _ = _run(["run", "--preset", "fig5", "--methods", "closed,mc", "--out", str(p),
                           "--workers", workers] + FAST, capsys)
        assert code == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_embedded_config_reproduces_run(tmp_path, capsys):
    code, out, _ = _run(["run", "--preset", "fig4", "--methods", "closed", "--sweep", "2"],
                        capsys)
    assert code == 0
    cfg = "\n".join(line[len("# config: "):] for line in out.splitlines()
                    if line.startswith("# config: "))
    fp, _ = parse_config(cfg)
    assert fp.base == preset("fig4").base and fp.variants == preset("fig4").variants
    path = tmp_path / "s.cfg"
    path.write_text(cfg)
    code, again, _ = _run(["run", "--config", str(path), "--methods", "closed"], capsys)
    assert code == 0 and _rows(again) == _rows(out)
    assert list(_rows(out)[0])[:2] == ["variant", "d_SR"]


def test_set_and_variant_filters(capsys):
    code, out, _ = _run(["run", "--preset", "fig2a", "--methods", "closed", "--sweep", "10 dB",
                         "--variant", "static", "--set", "p_m=30 dBW"], capsys)
    assert code == 0
    assert "p_m = 30.0 dBW" in out
    rows = _rows(out)
    assert len(rows) == 1 and "variant" not in rows[0]


def test_frames_without_mc_are_ignored(capsys):
    code, out, err = _run(["run", "--preset", "fig5", "--methods", "closed", "--sweep", "2",
                           "--frames", "1e6"], capsys)
    assert code == 0 and "frames ignored" in err
    assert "# frames:" not in out


def test_tolerance_report(capsys):
    code, _, err = _run(["run", "--preset", "fig5", "--methods", "closed,quadrature",
                         "--sweep", "3", "--tolerance-report"], capsys)
    assert code == 0
    assert "quadrature" in err and "N_R=3" in err


def test_gnuplot_stub(tmp_path, capsys):
    out = tmp_path / "f.csv"
    code, _, _ = _run(["run", "--preset", "fig5", "--methods", "closed", "--sweep", "2",
                       "--out", str(out), "--gnuplot-stub"], capsys)
    assert code == 0
    gp = out.with_suffix(".gp").read_text()
    assert "f.csv" in gp and gp.startswith("set datafile separator ','")
    assert _run(["run", "--preset", "fig5", "--methods", "closed", "--gnuplot-stub"],
                capsys)[0] == cli.EXIT_CONFIG


@pytest.mark.parametrize("argv", [
    ["run", "--preset", "fig99"],
    ["run", "--preset", "fig5", "--set", "speeed=3"],
    ["run", "--preset", "fig5", "--set", "p_a=10 mph"],
    ["run", "--preset", "fig5", "--variant", "nope"],
    ["run", "--preset", "fig5", "--methods", "closed,magic"],
    ["run", "--preset", "fig5", "--sweep", "1,,2"],
    ["run", "--config", "/nonexistent/x.cfg"],
    ["show-config", "fig99"],
])
def test_configuration_errors_exit_2(argv, capsys):
    code, out, err = _run(argv, capsys)
    assert code == cli.EXIT_CONFIG
    assert err.startswith("error:") and out == ""


def test_unknown_key_in_file_reports_line(tmp_path, capsys):
    path = tmp_path / "bad.cfg"
    path.write_text("[system]\npreset = fig5\n\nspeeed = 3\n")
    code, _, err = _run(["run", "--config", str(path)], capsys)
    assert code == 2 and "line 4" in err and "speeed" in err


def test_backend_failure_exit_3(monkeypatch, capsys):
    def boom(*a, **k):
        raise RuntimeError("backend down")

    for name in ("outage_avg", "outage_floor", "mc_outage"):
        monkeypatch.setattr(cli, name, boom)
    code, out, err = _run(["run", "--preset", "fig5", "--methods", "closed,mc"] + FAST, capsys)
    assert code == cli.EXIT_BACKEND
    assert "backend down" in out and "error:" in err


def test_partial_failure_still_succeeds(monkeypatch, capsys):
    monkeypatch.setattr(cli, "outage_floor", lambda *a, **k: (_ for _ in ()).throw(
        ArithmeticError("floor")))
    code, out, _ = _run(["run", "--preset", "fig5", "--methods", "closed", "--sweep", "2"],
                        capsys)
    assert code == 0
    row = _rows(out)[0]
    assert row["outage_floor_mu"] == "" and float(row["outage_closed"]) > 0
    assert "# diagnostic:" in out


def test_list_presets_and_show_config(capsys):
    code, out, _ = _run(["list-presets"], capsys)
    assert code == 0
    assert [line.split()[0] for line in out.splitlines()] == preset_ids()
    code, out, _ = _run(["show-config", "fig3"], capsys)
    assert code == 0
    fp, _ = parse_config(out)
    assert fp == preset("fig3")


def test_usage_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(["run", "--preset", "fig5", "--frames", "2.5"])
    assert info.value.code == 2
    with pytest.raises(SystemExit):
        cli.main(["run"])

from dataclasses import replace

import pytest

from cogrelay.config import (
    ConfigError,
    RunOptions,
    parse_assignment,
    parse_config,
    parse_sweep_values,
    serialize,
)
from cogrelay.scenarios import SystemConfig, preset

MINIMAL = """\
[system]
p_m = 27 dBW
p_a = 10 dB
[rf]
speed = 17 mph
[sweep]
name = p_a
values = 0, 5, 10 dB
"""


def test_minimal_file_units():
    fp, opts = parse_config(MINIMAL)
    assert opts == RunOptions()
    assert fp.base.scenario().P_M[0] == pytest.approx(10 ** 2.7, rel=1e-15)
    assert fp.base.speed_SR == pytest.approx(7.59968, abs=1e-12)
    assert fp.base.speed_SP == fp.base.speed_SR
    assert fp.sweep_name == "P_A_dB" and fp.sweep_values == (0.0, 5.0, 10.0)
    assert fp.methods == ("closed",)


def test_comments_case_and_run_options():
    text = MINIMAL.replace("[system]", "# header\n[System]  # trailing") + (
        "[mc]\nFRAMES = 1e6\nseed = 7\nmethods = closed, mc\n"
        "[variant fast]\nspeed_sr = 45 mph\nL = 25\n")
    fp, opts = parse_config(text)
    assert opts == RunOptions(("closed", "mc"), 1_000_000, 7)
    (v,) = fp.variants
    assert v.label == "fast"
    cfg = v.apply(fp.base)
    assert cfg.L == 25 and cfg.speed_SR == pytest.approx(45 * 0.44704)


def test_preset_reference_and_override():
    fp, _ = parse_config("[system]\npreset = fig4\np_a = 20 dB\n")
    ref = preset("fig4")
    assert fp.base.P_A_dB == 20.0
    assert fp.variants == ref.variants and fp.sweep_values == ref.sweep_values
    assert fp.base.replace(P_A_dB=ref.base.P_A_dB) == ref.base


def test_turbulence_shortcut():
    fp, _ = parse_config(MINIMAL)
    assert fp.base.alpha == SystemConfig().alpha
    text = MINIMAL.replace("p_a = 10 dB", "p_a = 10 dB\nturbulence = strong")
    fp, _ = parse_config(text)
    assert (fp.base.alpha, fp.base.beta, fp.base.xi) == (5.0711, 1.1547, 1.6885)


@pytest.mark.parametrize("pid", ["fig2a", "fig3", "fig6", "fig8"])
def test_serialize_round_trip_with_options(pid):
    opts = RunOptions(("closed", "mc"), 2_000_000, 11)
    text = serialize(preset(pid), opts)
    fp, back = parse_config(text)
    assert fp == replace(preset(pid), methods=("closed", "mc"))
    assert back.methods == ("closed", "mc")
    assert (back.frames, back.seed) == (2_000_000, 11)


@pytest.mark.parametrize("text, line, key", [
    (MINIMAL + "[system]\np_a = 3 dB\n", None, None),
    ("[system]\np_a = 1 dB\np_a = 2 dB\n", 3, "p_a"),
    ("[system]\nspeeed = 3\n", 2, "speeed"),
    ("[system]\np_a = 10 mph\n", 2, "p_a"),
    ("[rf]\nspeed_sr = 10 dB\n", 2, "speed_sr"),
    ("[radio]\n", 1, None),
    ("p_a = 1\n", 1, None),
    ("[system]\np_a 10\n", 2, None),
    ("[system]\nj = 2.5\n", 2, "j"),
    ("[system]\np_a = inf dB\n", 2, "p_a"),
    ("[rf]\np_a = 10 dB\n", 2, "p_a"),
    ("[system]\nmodulations = QAM\n", 2, "modulations"),
    ("[mc]\nmethods = closed, magic\n", 2, "methods"),
    ("[mc]\nframes = -3\n", 2, "frames"),
    ("[system]\npreset = fig99\n", 2, "preset"),
    ("[system]\nturbulence = mild\n", 2, "turbulence"),
    ("[variant a]\n[variant a]\n", 2, None),
])
def test_errors_carry_location(text, line, key):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    err = info.value
    if line is not None:
        assert err.line == line and f"line {line}" in str(err)
    if key is not None:
        assert err.key == key and repr(key) in str(err)


def test_duplicate_section_key_reports_first_line():
    with pytest.raises(ConfigError, match="first set on line 2"):
        parse_config("[system]\np_a = 1 dB\np_a = 2 dB\n")


def test_missing_sweep():
    with pytest.raises(ConfigError, match="sweep"):
        parse_config("[system]\np_a = 10 dB\n")
    with pytest.raises(ConfigError, match="without a sweep name"):
        parse_config("[sweep]\nvalues = 1, 2\n")


def test_invalid_scenario_is_config_error():
    with pytest.raises(ConfigError, match="invalid|L"):
        parse_config(MINIMAL.replace("p_a = 10 dB", "p_a = 10 dB\nl = 99"))


def test_assignment_and_sweep_helpers():
    assert parse_assignment("p_a = 15 dB") == ("P_A_dB", 15.0)
    assert parse_assignment("speed_sr=17 mph")[1] == pytest.approx(7.59968)
    assert parse_assignment("N_R=4") == ("N_R", 4)
    with pytest.raises(ConfigError):
        parse_assignment("p_a")
    with pytest.raises(ConfigError):
        parse_assignment("nope=1")
    assert parse_sweep_values("P_A_dB", "0, 5 dB, 10 dB") == (0.0, 5.0, 10.0)
    assert parse_sweep_values("N_R", "2, 3") == (2.0, 3.0)
    with pytest.raises(ConfigError):
        parse_sweep_values("P_A_dB", "0,,5")
    with pytest.raises(ConfigError):
        parse_sweep_values("P_A_dB", "0, 5 mph")


def test_readme_example_parses():
    import re
    from pathlib import Path

    text = (Path(__file__).parents[1] / "README.md").read_text()
    block = re.search(r"```ini\n(.*?)```", text, re.S).group(1)
    fp, opts = parse_config(block)
    assert fp.base.alpha == 5.0711 and fp.base.P_A_dB == 15.0
    assert fp.sweep_name == "d_SR" and fp.sweep_values == (2.0, 4.0, 8.0)
    assert [v.label for v in fp.variants] == ["near"]
    assert opts == RunOptions(("closed", "mc"), 1_000_000, 3)

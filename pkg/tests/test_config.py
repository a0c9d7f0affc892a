import pytest

from spinfork.config import (ConfigError, parse_config,
                             parse_config_with_overrides, resolved_k_level)


def test_minimal_truth_table_defaults():
    cfg = parse_config("scenario = truth_table\n")
    assert cfg.scenario == "truth_table"
    assert cfg.fork.spacing_s == 88.0
    assert cfg.t_det == pytest.approx(0.8e-9)
    assert cfg.t_end == pytest.approx(3.2e-9)
    assert cfg.demag_mode == "fft"
    assert cfg.autocalibrate is True
    assert cfg.snapshots == (0.0, 0.8e-9, 3.2e-9)


def test_unknown_key_rejected_by_name():
    with pytest.raises(ConfigError, match="unknown key 'foo'"):
        parse_config("foo = 1\n")


def test_syntax_error_reports_line_number():
    with pytest.raises(ConfigError, match="line 3"):
        parse_config("scenario = truth_table\n\nnot a statement\n")


def test_spacing_below_clearance_rejected():
    with pytest.raises(ConfigError, match="clearance"):
        parse_config("geometry.spacing_s = 40\ngeometry.arm_width = 40\n")


def test_small_spacing_flagged_not_rejected():
    cfg = parse_config("geometry.spacing_s = 48\n")
    assert any("48" in f for f in cfg.flags)


def test_duplicate_key_rejected():
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config("run.t_end = 1e-9\nrun.t_end = 2e-9\n")


def test_bad_value_reports_key():
    with pytest.raises(ConfigError, match="run.workers"):
        parse_config("run.workers = many\n")
    with pytest.raises(ConfigError, match="t_det"):
        parse_config("clock.t_det = 4e-9\n")  # beyond t_end


def test_comments_and_blank_lines_ignored():
    cfg = parse_config("""
# a comment
scenario = single_arm   # trailing comment
single_arm.input = 2
""")
    assert cfg.scenario == "single_arm"
    assert cfg.single_arm_input == 2


def test_overrides_applied_after_file():
    cfg = parse_config_with_overrides(
        "scenario = truth_table\n",
        sets=["run.t_end=2.4e-9", "demag.mode=local",
              "snapshots=0,1e-9"])
    assert cfg.t_end == pytest.approx(2.4e-9)
    assert cfg.demag_mode == "local"
    assert cfg.snapshots == (0.0, 1e-9)


def test_override_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config_with_overrides("scenario = truth_table\n",
                                    sets=["nope=1"])


def test_k_level_auto_resolves_to_strain_anisotropy():
    cfg = parse_config("scenario = truth_table\n")
    assert cfg.k_level == "auto"
    assert resolved_k_level(cfg) == pytest.approx(2.0e5, rel=1e-12)
    cfg2 = parse_config("clock.k_level = 1.5e5\n")
    assert resolved_k_level(cfg2) == pytest.approx(1.5e5)


def test_scenario_choices_validated():
    with pytest.raises(ConfigError, match="scenario"):
        parse_config("scenario = nonsense\n")
    with pytest.raises(ConfigError, match="single_arm.input"):
        parse_config("single_arm.input = 4\n")
    with pytest.raises(ConfigError, match="majority.bits"):
        parse_config("majority.bits = 10\n")


def test_echo_contains_all_keys():
    cfg = parse_config("scenario = majority\nmajority.bits = 110\n")
    assert cfg.echo["majority.bits"] == "110"
    assert cfg.echo["geometry.spacing_s"] == 88.0
    assert cfg.majority_bits == (1, 1, 0)

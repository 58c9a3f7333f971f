"""Config file parsing and --set override layering."""

import dataclasses

import pytest

from dualtable.config import Config, ConfigError, load_config, parse_config_text


def test_defaults_match_reference_rates():
    cfg = Config()
    assert cfg.data_dir == "dualtable_data"
    assert cfg.W_M == 1e9
    assert cfg.R_M == 2e9
    assert cfg.W_A == 0.8e9
    assert cfg.R_A == 0.5e9
    assert cfg.k_default == 10
    assert cfg.compact_threshold == 0.25
    assert cfg.default_ratio == 0.05
    assert cfg.ewma_weight == 0.5


def test_cost_params_mapping():
    cfg = Config(W_M=3.0, R_M=4.0, W_A=5.0, R_A=6.0, k_default=7)
    p = cfg.cost_params()
    assert p.master_write_rate == 3.0
    assert p.master_read_rate == 4.0
    assert p.attached_write_rate == 5.0
    assert p.attached_read_rate == 6.0
    assert p.successive_reads_k == 7


def test_parse_text_full_file():
    text = """
    # engine rates, bytes per second
    data_dir = ./here   # trailing comment
    W_M = 1e9
    R_M = 2e9
    W_A = 0.8e9
    R_A = 0.5e9

    k_default = 30
    compact_threshold = 0.4
    default_ratio = 0.1
    ewma_weight = 0.7
    """
    cfg = parse_config_text(text)
    assert cfg.data_dir == "./here"
    assert cfg.k_default == 30
    assert cfg.compact_threshold == 0.4
    assert cfg.default_ratio == 0.1
    assert cfg.ewma_weight == 0.7


def test_parse_text_quoted_data_dir():
    assert parse_config_text("data_dir = './with space'").data_dir == "./with space"
    assert parse_config_text('data_dir = "./x"').data_dir == "./x"


def test_parse_text_keeps_unset_keys():
    base = Config(W_M=123.0)
    cfg = parse_config_text("R_M = 9.0", base)
    assert cfg.W_M == 123.0
    assert cfg.R_M == 9.0


def test_parse_text_unknown_key():
    with pytest.raises(ConfigError) as exc:
        parse_config_text("W_M = 1\nturbo = on\n")
    assert "line 2" in str(exc.value)
    assert "turbo" in str(exc.value)


def test_parse_text_missing_equals():
    with pytest.raises(ConfigError) as exc:
        parse_config_text("W_M 1e9")
    assert "line 1" in str(exc.value)


def test_parse_text_non_numeric_rate():
    with pytest.raises(ConfigError) as exc:
        parse_config_text("W_M = fast")
    assert "W_M" in str(exc.value)


def test_parse_text_empty_data_dir():
    with pytest.raises(ConfigError):
        parse_config_text("data_dir =")


def test_load_config_missing_file():
    with pytest.raises(ConfigError) as exc:
        load_config("/nonexistent/dualtable.toml")
    assert "not found" in str(exc.value)


def test_load_config_file_then_overrides(tmp_path):
    path = tmp_path / "cfg"
    path.write_text("W_M = 111\nk_default = 5\n", encoding="utf-8")
    cfg = load_config(str(path), ["k_default=9", "data_dir=./o"])
    assert cfg.W_M == 111.0
    assert cfg.k_default == 9.0  # --set wins over the file
    assert cfg.data_dir == "./o"


def test_load_config_overrides_only():
    cfg = load_config(None, ["R_A=2.5"])
    assert cfg.R_A == 2.5
    assert cfg.W_M == Config().W_M


def test_load_config_base_layering(tmp_path):
    # the bench command stacks --config, then --params, then --set
    first = tmp_path / "a"
    first.write_text("W_M = 1\nR_M = 2\n", encoding="utf-8")
    second = tmp_path / "b"
    second.write_text("R_M = 20\n", encoding="utf-8")
    cfg = load_config(str(first), None)
    cfg = load_config(str(second), None, base=cfg)
    cfg = load_config(None, ["W_A=7"], base=cfg)
    assert (cfg.W_M, cfg.R_M, cfg.W_A) == (1.0, 20.0, 7.0)


@pytest.mark.parametrize("pair", ["nope=1", "W_M", "=3", "k_default:4"])
def test_bad_set_pairs(pair):
    with pytest.raises(ConfigError) as exc:
        load_config(None, [pair])
    assert "known keys" in str(exc.value)


def test_config_is_frozen():
    with pytest.raises(dataclasses.FrozenInstanceError):
        Config().W_M = 2.0

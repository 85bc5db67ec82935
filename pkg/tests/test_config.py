import json

import pytest
from hypothesis import given, strategies as st

from mellincalc.config import ConfigError, RunConfig, load_config, parse_config, validate


class TestParse:
    def test_minimal_defaults(self):
        cfg = parse_config("alpha=2, multiplier=heat, model=cycle:16")
        assert cfg == RunConfig(alpha=2, multiplier="heat", model="cycle:16")
        assert cfg.p_values == (2.0, 4.0) and cfg.n_signals == 100

    def test_multiline_with_comments(self):
        cfg = parse_config("""
            # a comment line
            alpha = 3          # trailing comment
            multiplier = "bump:0.5,2"
            p_values = [1.5, 3]
            seed = 0x10
        """)
        assert cfg.alpha == 3 and cfg.multiplier == "bump:0.5,2"
        assert cfg.p_values == (1.5, 3.0) and cfg.seed == 16

    def test_list_commas_do_not_split_entries(self):
        cfg = parse_config("alpha=1, p_values=[2, 3, 4], multiplier=window:1,2,0.5")
        assert cfg.p_values == (2.0, 3.0, 4.0) and cfg.multiplier == "window:1,2,0.5"

    def test_json(self):
        cfg = parse_config(json.dumps({"alpha": 2, "p_values": [3], "u_max": 512}))
        assert cfg.p_values == (3.0,) and cfg.u_max == 512.0

    def test_grid_properties(self):
        cfg = parse_config("alpha=0, u_max=64, du=0.25, j_min=-5, j_max=5, q=4")
        assert cfg.ugrid.u_max == 64 and cfg.ugrid.du == 0.25
        assert cfg.tgrid.nodes[0] == 2.0**-5
        assert cfg.sgrid.s_min == 1e-8

    def test_load(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("alpha = 2\nmodel = cycle:8\n")
        assert load_config(str(p)).model == "cycle:8"

    def test_overrides(self):
        cfg = parse_config("alpha=2").with_overrides(seed=7, model=None)
        assert cfg.seed == 7 and cfg.model == "cycle:16"
        with pytest.raises(ConfigError):
            cfg.with_overrides(alpha=-3)

    @given(st.integers(0, 50), st.integers(0, 2**64 - 1))
    def test_round_trip_through_json(self, alpha, seed):
        cfg = RunConfig(alpha=alpha, seed=seed)
        assert parse_config(json.dumps(cfg.as_dict())) == cfg


class TestErrors:
    @pytest.mark.parametrize("text,key", [
        ("alpha=-1", "alpha"),
        ("alpha=2, p_values=[1.0]", "p_values"),
        ("alpha=2, p_values=[]", "p_values"),
        ("multiplier=heat", "alpha"),
        ("alpha=2, multiplier=nope", "multiplier"),
        ("alpha=2, multiplier=br_psi", "multiplier"),
        ("alpha=2, model=cycle:2", "model"),
        ("alpha=2, model=torus", "model"),
        ("alpha=2, seed=-1", "seed"),
        ("alpha=two", "alpha"),
        ("alpha=2, n_signals=50", "n_signals"),
        ("alpha=2, n_rademacher=8", "n_rademacher"),
        ("alpha=2, s_min=10, s_max=1", "s_min"),
        ("alpha=2, du=0", "u_max"),
        ("alpha=2, u_max=nan", "u_max"),
    ])
    def test_names_key(self, text, key):
        with pytest.raises(ConfigError) as exc:
            parse_config(text)
        assert exc.value.key == key
        assert repr(key) in str(exc.value)

    def test_unknown_key_position(self):
        with pytest.raises(ConfigError) as exc:
            parse_config("alpha = 2\n  colour = red\n")
        assert (exc.value.key, exc.value.line, exc.value.column) == ("colour", 2, 3)

    def test_duplicate_key(self):
        with pytest.raises(ConfigError, match="duplicate") as exc:
            parse_config("alpha=2\nalpha=3")
        assert exc.value.line == 2

    def test_missing_equals(self):
        with pytest.raises(ConfigError) as exc:
            parse_config("alpha=2\njust words")
        assert exc.value.line == 2 and exc.value.column == 1

    def test_missing_value(self):
        with pytest.raises(ConfigError, match="missing value"):
            parse_config("alpha=")

    def test_bad_json_position(self):
        with pytest.raises(ConfigError) as exc:
            parse_config('{"alpha": 2,\n "seed": }')
        assert exc.value.line == 2

    def test_json_unknown_key(self):
        with pytest.raises(ConfigError) as exc:
            validate({"alpha": 1, "bogus": 2})
        assert exc.value.key == "bogus"

    def test_bool_is_not_int(self):
        with pytest.raises(ConfigError):
            validate({"alpha": True})

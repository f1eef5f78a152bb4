
import pytest
from hypothesis import given, settings, strategies as st

from dlczqfc.config import RunConfig, dump_config, params_from_ini, params_to_ini, parse_config
from dlczqfc.errors import ConfigError
from dlczqfc.params import ExperimentParams


def test_empty_config_is_defaults():
    cfg = parse_config("")
    assert cfg == RunConfig()
    assert cfg.deph().tau == pytest.approx(23.6e-6)


def test_full_round_trip():
    cfg = parse_config("[experiment]\np = 0.02\n[device]\nnoise_coeff = 100\n[table1]\nmode = B\n")
    assert parse_config(dump_config(cfg)) == cfg


@settings(max_examples=100)
@given(st.floats(0, 0.999), st.floats(0, 1), st.floats(0, 1))
def test_params_round_trip(p, eta_cw, eta_r):
    params = ExperimentParams(p=p, eta_cw=eta_cw, eta_r=eta_r)
    assert params_from_ini(params_to_ini(params)) == params


@pytest.mark.parametrize("text,fragment", [
    ("[nonsense]\n", "unknown sections"),
    ("[experiment]\nfoo = 1\n", "unknown keys"),
    ("[experiment]\np = abc\n", "[experiment] p"),
    ("[experiment]\np = 1.5\n", "p=1.5"),
    ("[simulation]\nn_trials = 1.5\n", "not an integer"),
    ("[simulation]\nconverted = maybe\n", "boolean"),
    ("[dephasing]\ntau = 1e-5\ntemperature = 1e-4\n", "either"),
    ("[dephasing]\ntemperature = -1\n", "temperature"),
    ("[device]\neta_cpl = 2\n", "eta_cpl"),
    ("[table1]\nmode = C\n", "mode"),
    ("no section header", "malformed"),
])
def test_bad_config(text, fragment):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert fragment in str(exc.value)


def test_dephasing_from_temperature():
    cfg = parse_config("[dephasing]\ntemperature = 1.055210030824818e-4\n")
    assert cfg.deph().tau == pytest.approx(23.6e-6, rel=1e-9)


def test_lists_and_comments():
    cfg = parse_config("[link_budget]\neta_devs = 0.1, 0.2 ; two values\n")
    assert cfg.link_budget.eta_devs == (0.1, 0.2)

import textwrap
from pathlib import Path

import numpy as np
import pytest

from girsanov_kpz.config import load_config, parse_config
from girsanov_kpz.errors import ConfigError
from girsanov_kpz.kpz import kpz_residual

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

MINIMAL = """\
scenario: linear
T: 1
dt: 0.001
n_paths: 100
seed: 42
"""


def test_minimal_config():
    cfg = parse_config(MINIMAL)
    assert cfg.dimension == 2 and cfg.grid.N == 1000 and cfg.seed == 42
    assert cfg.refinement_dts == [0.001, 0.0005, 0.00025]
    assert cfg.region == [(-2.0, 2.0), (-2.0, 2.0)]


def test_dt_must_divide_T():
    with pytest.raises(ConfigError) as info:
        parse_config(MINIMAL.replace("dt: 0.001", "dt: 0.3"))
    assert info.value.field == "dt"
    assert info.value.line == 3


def test_sigma_referencing_missing_variable():
    text = textwrap.dedent("""\
        dimension: 2
        fields:
          sigma: [["1", "x3"], ["0", "1"]]
          drift: ["0", "0"]
          potential: "0"
        T: 1
        dt: 0.01
        """)
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.field == "fields.sigma[0][1]"
    assert info.value.line == 3
    assert "x3" in str(info.value)


@pytest.mark.parametrize("text,field", [
    ("T: 1\ndt: 0.1\n", "scenario"),
    (MINIMAL + "fields: {}\n", "scenario"),
    (MINIMAL + "colour: red\n", "colour"),
    (MINIMAL + "x0: [1]\n", "x0"),
    (MINIMAL.replace("linear", "spiral"), "scenario"),
    (MINIMAL.replace("T: 1", "T: -1"), "T"),
    ("scenario: bridge\nT: 2\ndt: 0.01\n", "T"),
    (MINIMAL + "dt_list: [0.01, 0.003]\n", "dt_list"),
    (MINIMAL + "thresholds: {tau_abs: 1e-3, bogus: 1}\n", "thresholds.bogus"),
])
def test_config_errors_name_field(text, field):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.field == field


def test_yaml_syntax_error_has_position():
    with pytest.raises(ConfigError) as info:
        parse_config("scenario: [linear\nT: 1\n")
    assert info.value.line is not None


def test_expression_syntax_error_has_position():
    text = "dimension: 1\nfields:\n  sigma: [['1']]\n  potential: 'x1 +* 2'\nT: 1\ndt: 0.1\n"
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.field == "fields.potential"
    assert info.value.line == 4
    assert "offset" in str(info.value)


def test_explicit_fields_build_gradient_drift():
    text = textwrap.dedent("""\
        dimension: 1
        fields:
          sigma: [["1"]]
          potential: "-x1^2/(2*(2-t)) - 0.5*log(2*pi*(2-t))"
        T: 1
        dt: 0.01
        """)
    cfg = parse_config(text)
    x = np.array([[0.5], [-1.0]])
    np.testing.assert_allclose(cfg.fields.b(0.5, x)[:, 0], -x[:, 0] / 1.5, rtol=1e-8)
    assert np.max(np.abs(kpz_residual(cfg.potential, cfg.fields, 0.5, x))) < 1e-4
    assert cfg.fields.constant_sigma is not None


def test_candidate_override_and_phi():
    cfg = parse_config("scenario: bridge\nT: 1\ndt: 0.01\ncandidate: 'x1'\n"
                       "burgers: {phi: 'r^2'}\n")
    assert cfg.potential(0.0, np.array([3.0])) == 3.0
    assert cfg.phi(2.0) == 4.0
    cfg = parse_config("scenario: bridge\nT: 1\ndt: 0.01\nburgers: {phi: {coef: 2, power: 3}}\n")
    assert cfg.phi(2.0) == 16.0


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.yaml")), ids=lambda p: p.name)
def test_shipped_configs_load(path):
    assert load_config(path).T > 0

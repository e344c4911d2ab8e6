import pytest

from hjvanish.config import COMMANDS, load_config, parse_config
from hjvanish.errors import ValidationError


def test_minimal_solve_config():
    cfg = parse_config({"hamiltonian": {"potential": "exp_abs"}, "solve": {"delta": 0.1}}, command="solve")
    assert cfg.hamiltonian.kind == "eikonal"
    assert cfg.domain.dim == 1
    assert cfg.solver.nodes == 2001


@pytest.mark.parametrize(
    "raw",
    [
        {"hamiltonain": {}},
        {"grid": {"node": 11}},
        {"hamiltonian": {"kind": "cubic"}},
        {"domain": {"kind": "square"}},
        {"domain": {"a": -1.0}},
        {"grid": {"nodes": 10.5}},
        {"solve": {"delta": 0.0}},
        {"solve": {"delta": "0.1"}},
        {"hamiltonian": {"dim": 2}, "domain": {"kind": "interval"}},
    ],
)
def test_invalid_solve_configs(raw):
    with pytest.raises(ValidationError):
        parse_config(raw, command="solve")


def test_expansion_needs_rate():
    with pytest.raises(ValidationError):
        parse_config({"expansion": {}}, command="expansion")


def test_ladder_must_decrease():
    with pytest.raises(ValidationError):
        parse_config({"family": {"lambdas": [0.1, 0.2, 0.05]}}, command="family")


@pytest.mark.parametrize("K", [2, 21, 3.5, True])
def test_counterexample_depth(K):
    with pytest.raises(ValidationError):
        parse_config({"counterexample": {"K": K}}, command="counterexample")


def test_counterexample_skips_hamiltonian():
    cfg = parse_config({"counterexample": {"K": 4}}, command="counterexample")
    assert cfg.hamiltonian is None and cfg.domain is None


def test_rate_shorthand():
    cfg = parse_config({"expansion": {"rate": -1.0}}, command="expansion")
    assert cfg.section("expansion")["rate"] == -1.0


def test_potential_table(tmp_path):
    (tmp_path / "v.csv").write_text("x,V\n-1,1\n0,0\n1,1\n")
    (tmp_path / "c.toml").write_text('[hamiltonian]\npotential_table = "v.csv"\n')
    cfg = load_config(tmp_path / "c.toml", "solve")
    assert cfg.hamiltonian.potential(__import__("numpy").array([[0.5]]))[0] == pytest.approx(0.5)


def test_missing_potential_table(tmp_path):
    (tmp_path / "c.toml").write_text('[hamiltonian]\npotential_table = "nope.csv"\n')
    with pytest.raises(ValidationError):
        load_config(tmp_path / "c.toml", "solve")


def test_missing_file(tmp_path):
    with pytest.raises(ValidationError):
        load_config(tmp_path / "none.toml")


def test_toml_syntax_error(tmp_path):
    (tmp_path / "bad.toml").write_text("[solve\n")
    with pytest.raises(ValidationError):
        load_config(tmp_path / "bad.toml")


def test_commands():
    assert len(COMMANDS) == 8

import pytest

from falcon_bft.scenario import ScenarioError, load_scenario

GOOD = """
[system]
n = 4
f = 1
seed = 7
instances = 3
tx_load = 8

[network]
mode = lockstep

[faults]
4 = crash:0

[adversary]
rule1 = body=Echo1 delay=10
rule2 = to=2 acsq=1 proto=gbc index=1 delay=5
"""


def write(tmp_path, text, name="scenario.ini"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_parse_full_scenario(tmp_path):
    config = load_scenario(write(tmp_path, GOOD))
    assert config.params.n == 4 and config.params.f == 1
    assert config.seed == 7
    assert config.num_instances == 3
    assert {f.node: f.kind for f in config.faults} == {4: "crash"}
    assert config.rules[0].body == "Echo1" and config.rules[0].delay == 10
    assert config.rules[1].recipient == 2 and config.rules[1].proto == "gbc"
    config.validate()


def test_fault_budget_enforced_at_validate(tmp_path):
    text = GOOD.replace("4 = crash:0", "4 = crash:0\n2 = equivocate")
    config = load_scenario(write(tmp_path, text))
    with pytest.raises(Exception):
        config.validate()


def test_unknown_key_rejected(tmp_path):
    with pytest.raises(ScenarioError):
        load_scenario(write(tmp_path, "[system]\nn = 4\nbogus = 1\n"))


def test_unknown_section_rejected(tmp_path):
    with pytest.raises(ScenarioError):
        load_scenario(write(tmp_path, "[system]\nn = 4\n\n[extra]\nx = 1\n"))


def test_bad_fault_rejected(tmp_path):
    with pytest.raises(ScenarioError):
        load_scenario(write(tmp_path, "[faults]\n2 = equivocate:5\n"))


def test_bad_rule_rejected(tmp_path):
    with pytest.raises(ScenarioError):
        load_scenario(write(tmp_path, "[adversary]\nrule1 = wat=1\n"))


def test_malformed_params_rejected(tmp_path):
    with pytest.raises(ScenarioError):
        load_scenario(write(tmp_path, "[system]\nn = 3\nf = 1\n"))


def test_defaults(tmp_path):
    config = load_scenario(write(tmp_path, "[system]\nn = 7\nf = 2\n"))
    assert config.mode == "lockstep"
    assert config.num_instances == 1
    assert config.faults == () and config.rules == ()

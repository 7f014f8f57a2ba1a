import json

import pytest
from pydantic import ValidationError

from asrkit.config import RunConfig, dump_config, load_config

BASE = {
    "contract": {"notional": 9e8, "days": 63,
                 "exercise_days": {"first": 22, "last": 62}},
    "market": {"initial_price": 45.0, "sigma": 0.6, "volume": 4e6,
               "eta": 0.1, "phi": 0.75},
    "risk": {"gamma": 2.5e-7, "rho_lo": -0.25, "rho_hi": 0.25, "rho_exec": 0.25},
    "grid": {"n_q": 201, "n_a": 21, "q_max": 25e6},
}


def test_parse_and_domain_mapping():
    cfg = RunConfig.model_validate(BASE)
    contract, market, risk, grid = cfg.to_domain()
    assert contract.F == 9e8
    assert contract.exercise_set == frozenset(range(22, 63))
    assert contract.n0 == 22
    assert market.volume == 4e6
    assert risk.rho_lo == -0.25
    assert grid.n_A == 21 and grid.n_S is None


def test_round_trip_identity(tmp_path):
    cfg = RunConfig.model_validate(BASE)
    f = tmp_path / "cfg.json"
    dump_config(cfg, f)
    again = load_config(f)
    assert again == cfg
    assert RunConfig.model_validate(json.loads(dump_config(again))) == cfg


def test_unknown_keys_rejected():
    bad = json.loads(json.dumps(BASE))
    bad["market"]["spread"] = 0.01
    with pytest.raises(ValidationError, match="spread"):
        RunConfig.model_validate(bad)
    bad2 = json.loads(json.dumps(BASE))
    bad2["typo_section"] = {}
    with pytest.raises(ValidationError):
        RunConfig.model_validate(bad2)


def test_spline_needs_four_a_knots():
    bad = json.loads(json.dumps(BASE))
    bad["grid"]["n_a"] = 3
    with pytest.raises(ValidationError, match="n_a"):
        RunConfig.model_validate(bad)


def test_empty_exercise_days_rejected():
    bad = json.loads(json.dumps(BASE))
    bad["contract"]["exercise_days"] = []
    with pytest.raises(ValidationError):
        RunConfig.model_validate(bad)
    bad["contract"]["exercise_days"] = [63]
    with pytest.raises(ValidationError):
        RunConfig.model_validate(bad)


def test_explicit_exercise_list():
    cfg = json.loads(json.dumps(BASE))
    cfg["contract"]["exercise_days"] = [22, 30, 40]
    parsed = RunConfig.model_validate(cfg)
    assert parsed.to_domain()[0].exercise_set == frozenset({22, 30, 40})


def test_volume_curve_accepted():
    cfg = json.loads(json.dumps(BASE))
    cfg["market"]["volume"] = [4e6] * 63
    parsed = RunConfig.model_validate(cfg)
    assert parsed.to_domain()[1].volume == tuple([4e6] * 63)
    cfg["market"]["volume"] = [4e6, -1.0]
    with pytest.raises(ValidationError):
        RunConfig.model_validate(cfg)


def test_with_param_sweeps_sections():
    cfg = RunConfig.model_validate(BASE)
    assert cfg.with_param("eta", 0.2).market.eta == 0.2
    assert cfg.with_param("gamma", 0.0).risk.gamma == 0.0
    assert cfg.with_param("beta", 0.01).contract.beta == 0.01
    assert cfg.with_param("eta", 0.2).market.sigma == cfg.market.sigma


def test_sweep_section():
    cfg = json.loads(json.dumps(BASE))
    cfg["sweep"] = {"param": "sigma", "values": [0.3, 0.6, 1.2]}
    parsed = RunConfig.model_validate(cfg)
    assert parsed.sweep.param == "sigma"
    cfg["sweep"] = {"param": "nope", "values": [1.0]}
    with pytest.raises(ValidationError):
        RunConfig.model_validate(cfg)

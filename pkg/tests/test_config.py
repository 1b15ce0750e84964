import pytest
import yaml

from gtdrift import config as C


def test_defaults():
    cfg = C.load(None)
    assert cfg.N == 3 and cfg.seed == 42
    assert cfg.drift_spec().drifts == (-1.0, 0.0, 1.0)
    assert cfg.rate_spec().rates == (1.0, 1.0, 1.0)
    assert cfg.thresholds == C.DEFAULT_THRESHOLDS


def test_yaml_round_trip(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump({"N": 2, "drifts": [-0.5, 0.5], "t": 2.0,
                                    "thresholds": {"mc_matrix": 0.02}}))
    cfg = C.load(path)
    assert cfg.N == 2 and cfg.t == 2.0
    assert cfg.thresholds["mc_matrix"] == 0.02
    assert cfg.thresholds["mc_warren"] == C.DEFAULT_THRESHOLDS["mc_warren"]
    assert C.from_dict(cfg.to_dict()) == cfg


def test_empty_yaml(tmp_path):
    path = tmp_path / "empty.yaml"
    path.write_text("")
    assert C.load(path) == C.SimConfig()


@pytest.mark.parametrize("doc, path", [
    ({"N": 0}, "N"),
    ({"N": "three"}, "N"),
    ({"drifts": [0.0, "x"]}, "drifts.1"),
    ({"thresholds": {"mc_matrix": "big"}}, "thresholds.mc_matrix"),
    ({"thresholds": {"bogus": 1}}, "thresholds.bogus"),
    ({"sede": 1}, "sede"),
    ({"dt": -1e-3}, "dt"),
])
def test_schema_errors_name_the_key(doc, path):
    with pytest.raises(C.ConfigError) as exc:
        C.from_dict(doc)
    assert exc.value.path == path
    assert str(exc.value).startswith(path + ":")


def test_top_level_must_be_mapping(tmp_path):
    path = tmp_path / "list.yaml"
    path.write_text("- 1\n- 2\n")
    with pytest.raises(C.ConfigError):
        C.load(path)


def test_override_revalidates():
    cfg = C.override(C.SimConfig(), N=2, drifts=[0.0, 1.0], seed=None)
    assert cfg.N == 2 and cfg.seed == 42
    with pytest.raises(C.ConfigError):
        C.override(cfg, replicas=-1)


def test_length_mismatch():
    with pytest.raises(C.ConfigError) as exc:
        C.SimConfig(N=3, drifts=[0.0, 1.0]).drift_spec()
    assert exc.value.path == "drifts"
    with pytest.raises(C.ConfigError):
        C.SimConfig(N=2, rates=[1.0]).rate_spec()


def test_rates_from_drifts_and_T():
    cfg = C.SimConfig(N=2, drifts=[-1.0, 1.0], T=100.0)
    r = cfg.rate_spec()
    # a larger drift slows the walker: the lattice axis points against the continuous one
    assert r.rates[0] > 1.0 > r.rates[1]

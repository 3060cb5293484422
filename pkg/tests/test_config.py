import json

import pytest

from roomcad.config import Config, ConfigError, load_config


def test_defaults():
    c = Config()
    assert c.budget == 250 and c.rays_per_vp == 10
    assert c.rho_begin == 0.2 and c.rho_end == 1e-3
    assert c.nms_iou == 0.3 and c.score_threshold == 0.5
    assert json.loads(c.to_json())["optimizer"] == "cobyla"


def test_overrides_and_file(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"budget": 100, "camera_height": 1.5}))
    c = load_config(p, rays_per_vp=20)
    assert (c.budget, c.camera_height, c.rays_per_vp) == (100, 1.5, 20)
    assert isinstance(Config(camera_height=2).camera_height, float)


@pytest.mark.parametrize(
    "kw",
    [{"budget": 2.5}, {"budget": True}, {"nms_iou": 1.5}, {"camera_height": 0.0}, {"optimizer": "bfgs"},
     {"refine": "yes"}, {"rho_end": "small"}],
)
def test_bad_values(kw):
    with pytest.raises(ConfigError):
        Config(**kw)


def test_unknown_key(tmp_path):
    with pytest.raises(ConfigError):
        Config().with_overrides(budjet=10)
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"rays": 3}))
    with pytest.raises(ConfigError):
        load_config(p)


def test_bad_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    (tmp_path / "a.json").write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "a.json")


def test_round_trip_through_json(tmp_path):
    c = Config(budget=77, optimizer="simplex")
    p = tmp_path / "c.json"
    p.write_text(c.to_json())
    assert load_config(p) == c

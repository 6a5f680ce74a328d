import json

import pytest

from pursuit_lab import config
from pursuit_lab.config import (
    BUILTIN_ENV_NAMES,
    ConfigError,
    InvalidConfigError,
    builtin_env,
    builtin_env_text,
    parse_config,
    serialize_config,
    validate_config,
)


def doc_dict(name="4p2e3o"):
    return json.loads(builtin_env_text(name))


def test_parse_appendix_style_document():
    doc = doc_dict()
    doc["players"]["num_p"] = 4
    doc["players"]["num_e"] = 2
    text = json.dumps(doc)
    cfg = parse_config(text)
    assert cfg.players.num_p == 4
    assert cfg.players.num_e == 2
    assert cfg.site.boundary_width == 3.6
    assert cfg.site.boundary_height == 5
    assert cfg.task.capture_range == 0.2
    assert cfg.task.safe_radius == 0.1
    assert cfg.task.fps == 10
    assert cfg.players.reception_range == 2
    assert cfg.players.velocity_p == 0.3
    assert cfg.players.velocity_e == 0.6


def test_control_split_mismatch_is_violation():
    doc = doc_dict()
    doc["players"]["num_ctrl"] = 3
    doc["players"]["num_unctrl"] = 2
    with pytest.raises(InvalidConfigError) as err:
        parse_config(json.dumps(doc))
    assert any("num_ctrl+num_unctrl != num_p" in v for v in err.value.violations)


def test_obstacle_outside_boundary_is_violation():
    doc = doc_dict()
    doc["site"]["obstacles"]["obstacle1"]["center"] = [10, 10]
    with pytest.raises(InvalidConfigError) as err:
        parse_config(json.dumps(doc))
    assert any("outside boundary" in v for v in err.value.violations)


def test_unknown_key_rejected_with_path():
    doc = doc_dict()
    doc["task"]["velocty"] = 1.0
    with pytest.raises(ConfigError) as err:
        parse_config(json.dumps(doc))
    assert "$.task.velocty" in str(err.value)


def test_missing_key_reported_with_path():
    doc = doc_dict()
    del doc["task"]["fps"]
    with pytest.raises(ConfigError) as err:
        parse_config(json.dumps(doc))
    assert "$.task.fps" in str(err.value)


def test_type_mismatch_reported_with_path():
    doc = doc_dict()
    doc["players"]["num_p"] = "four"
    with pytest.raises(ConfigError) as err:
        parse_config(json.dumps(doc))
    assert "$.players.num_p" in str(err.value)


def test_malformed_json_is_config_error():
    with pytest.raises(ConfigError):
        parse_config("{not json")


def test_validate_collects_all_violations():
    doc = doc_dict()
    doc["task"]["capture_range"] = -0.2
    doc["task"]["safe_radius"] = -1
    cfg = parse_config(json.dumps(doc), validate=False)
    violations = validate_config(cfg)
    assert "capture_range must be positive" in violations
    assert "safe_radius must be positive" in violations
    assert len(violations) >= 2


def test_negative_capture_range_message():
    doc = doc_dict()
    doc["task"]["capture_range"] = -0.2
    cfg = parse_config(json.dumps(doc), validate=False)
    assert validate_config(cfg) == ["capture_range must be positive"]


def test_respawn_region_obstacle_overlap_detected():
    # Move an obstacle into the evader respawn band and cross-check the
    # analytic intersection test against a brute-force point grid.
    doc = doc_dict()
    doc["site"]["obstacles"]["obstacle3"] = {"shape": "circle", "center": [1.8, 4.3], "radius": 0.25}
    cfg = parse_config(json.dumps(doc), validate=False)
    violations = validate_config(cfg)
    assert any("respawn region intersects obstacle" in v for v in violations)

    region = cfg.players.respawn_region.evader
    ob = cfg.site.obstacles[2]
    hit = False
    for i in range(81):
        for j in range(81):
            x = region.x_min + (region.x_max - region.x_min) * i / 80
            y = region.y_min + (region.y_max - region.y_min) * j / 80
            if ob.clearance(x, y) < cfg.task.safe_radius:
                hit = True
    assert hit


@pytest.mark.parametrize("name", BUILTIN_ENV_NAMES)
def test_builtins_validate_clean(name):
    assert validate_config(builtin_env(name)) == []


@pytest.mark.parametrize("name", BUILTIN_ENV_NAMES)
def test_builtin_roundtrip(name):
    cfg = builtin_env(name)
    assert parse_config(serialize_config(cfg)) == cfg


def test_builtin_env_deterministic_bytes():
    assert builtin_env_text("4p2e3o") == builtin_env_text("4p2e3o")
    assert builtin_env("4p2e1o") == builtin_env("4p2e1o")


def test_builtin_counts_match_labels():
    cfg = builtin_env("4p2e3o")
    assert cfg.players.num_p == 4 and cfg.players.num_e == 2
    shapes = sorted(ob.shape for ob in cfg.site.obstacles)
    assert shapes == ["circle", "rectangle", "rectangle"]

    cfg = builtin_env("4p2e1o")
    assert len(cfg.site.obstacles) == 1
    ob = cfg.site.obstacles[0]
    # single central obstacle
    assert ob.center == (cfg.site.boundary_width / 2, cfg.site.boundary_height / 2)

    cfg = builtin_env("4p2e5o")
    assert len(cfg.site.obstacles) == 5 and cfg.players.num_e == 2

    cfg = builtin_env("4p3e5o")
    assert len(cfg.site.obstacles) == 5 and cfg.players.num_e == 3


@pytest.mark.parametrize("name", BUILTIN_ENV_NAMES)
def test_builtin_spawn_regions(name):
    cfg = builtin_env(name)
    for region in (cfg.players.respawn_region.pursuer, cfg.players.respawn_region.evader):
        assert region.width == pytest.approx(3.2)
        assert region.height == pytest.approx(0.6)
    # opposite sides of the arena
    assert cfg.players.respawn_region.pursuer.center[1] < cfg.site.boundary_height / 2
    assert cfg.players.respawn_region.evader.center[1] > cfg.site.boundary_height / 2


@pytest.mark.parametrize("name", BUILTIN_ENV_NAMES)
def test_builtin_obstacle_clearances(name):
    # Canonical layouts keep >= 0.8 m between safe-radius-inflated obstacles.
    cfg = builtin_env(name)
    obs = cfg.site.obstacles
    for i in range(len(obs)):
        for j in range(i + 1, len(obs)):
            a, b = obs[i], obs[j]
            qx, qy = b.closest_point(*a.center)
            d = a.clearance(qx, qy)
            assert d - 2 * cfg.task.safe_radius >= 0.8 - 1e-9


def test_unknown_builtin_name():
    with pytest.raises(KeyError):
        builtin_env("9p9e9o")


def test_unseen_drones_consistency_rules():
    doc = doc_dict()
    doc["players"]["unseen_drones"] = []
    cfg = parse_config(json.dumps(doc), validate=False)
    assert "unseen_drones must be nonempty when num_unctrl > 0" in validate_config(cfg)

    doc["players"]["unseen_drones"] = ["teleport"]
    cfg = parse_config(json.dumps(doc), validate=False)
    assert any("unknown unseen_drones policy id" in v for v in validate_config(cfg))


def test_schema_document_accepts_builtins():
    jsonschema = pytest.importorskip("jsonschema")
    schema = json.loads(config.schema_text())
    jsonschema.Draft202012Validator.check_schema(schema)
    for name in BUILTIN_ENV_NAMES:
        jsonschema.validate(json.loads(builtin_env_text(name)), schema)
    bad = doc_dict()
    bad["task"]["extra_key"] = 1
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate(bad, schema)


def test_override_helpers():
    cfg = builtin_env("4p2e3o")
    sp = config.with_control_split(cfg, 4, 0)
    assert sp.players.num_ctrl == 4 and sp.players.num_unctrl == 0
    assert sp.players.unseen_drones == ()
    assert validate_config(sp) == []
    short = config.with_task_horizon(cfg, 300)
    assert short.task.task_horizon == 300
    slow = config.with_velocities(cfg, velocity_e=0.25)
    assert slow.players.velocity_e == 0.25
    assert cfg.task.task_horizon == 1000  # originals untouched

"""Environment configuration: parsing, validation, and the four built-in arenas.

Configs are plain JSON documents with three sections (players / site / task);
`config_data/env_config.schema.json` is the published JSON-Schema mirror of
the structural rules enforced here. Parsing is strict: unknown keys, missing
keys, and type mismatches are hard errors reported with their JSON path.
Geometric and cross-field invariants are checked by `validate_config`, which
returns *every* violation rather than stopping at the first.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from functools import lru_cache
from importlib import resources

from . import geometry

BUILTIN_ENV_NAMES = ("4p2e3o", "4p2e1o", "4p2e5o", "4p3e5o")

#: Policy identifiers accepted in players.unseen_drones. "ckpt:<path>" refers
#: to a saved checkpoint archive and is validated at load time, not here.
SCRIPTED_POLICY_IDS = ("greedy", "vicsek", "random")


class ConfigError(ValueError):
    """Structural problem: malformed JSON, unknown/missing key, bad type."""


class InvalidConfigError(ValueError):
    """A structurally valid document that violates config invariants."""

    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = list(violations)


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle in meters, used for respawn regions."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def center(self) -> tuple[float, float]:
        return (self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)


@dataclass(frozen=True)
class Obstacle:
    shape: str  # "circle" | "rectangle"
    center: tuple[float, float]
    radius: float | None = None
    half_extents: tuple[float, float] | None = None

    def clearance(self, px: float, py: float) -> float:
        """Signed distance from a point to this obstacle (negative inside)."""
        if self.shape == "circle":
            return geometry.circle_clearance(px, py, self.center[0], self.center[1], self.radius)
        return geometry.rect_clearance(
            px, py, self.center[0], self.center[1], self.half_extents[0], self.half_extents[1]
        )

    def closest_point(self, px: float, py: float) -> tuple[float, float]:
        if self.shape == "circle":
            return geometry.closest_point_on_circle(px, py, self.center[0], self.center[1], self.radius)
        return geometry.closest_point_on_rect(
            px, py, self.center[0], self.center[1], self.half_extents[0], self.half_extents[1]
        )


@dataclass(frozen=True)
class RespawnRegion:
    pursuer: Rect
    evader: Rect


@dataclass(frozen=True)
class PlayersCfg:
    num_p: int
    num_e: int
    num_ctrl: int
    num_unctrl: int
    random_respawn: bool
    respawn_region: RespawnRegion
    reception_range: float
    velocity_p: float
    velocity_e: float
    unseen_drones: tuple[str, ...]


@dataclass(frozen=True)
class SiteCfg:
    boundary_width: float
    boundary_height: float
    obstacles: tuple[Obstacle, ...]


@dataclass(frozen=True)
class TaskCfg:
    task_name: str
    capture_range: float
    safe_radius: float
    task_horizon: int
    fps: float


@dataclass(frozen=True)
class EnvConfig:
    players: PlayersCfg
    site: SiteCfg
    task: TaskCfg


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

def _check_keys(obj: dict, allowed: tuple[str, ...], path: str, errors: list[str]) -> None:
    for key in obj:
        if key not in allowed:
            errors.append(f"{path}.{key}: unknown key")
    for key in allowed:
        if key not in obj:
            errors.append(f"{path}.{key}: missing required key")


def _get_number(obj: dict, key: str, path: str, errors: list[str]) -> float:
    value = obj.get(key)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        if key in obj:
            errors.append(f"{path}.{key}: expected number, got {type(value).__name__}")
        return 0.0
    return float(value)


def _get_int(obj: dict, key: str, path: str, errors: list[str]) -> int:
    value = obj.get(key)
    if isinstance(value, bool) or not isinstance(value, int):
        if key in obj:
            errors.append(f"{path}.{key}: expected integer, got {type(value).__name__}")
        return 0
    return value


def _get_bool(obj: dict, key: str, path: str, errors: list[str]) -> bool:
    value = obj.get(key)
    if not isinstance(value, bool):
        if key in obj:
            errors.append(f"{path}.{key}: expected boolean, got {type(value).__name__}")
        return False
    return value


def _get_str(obj: dict, key: str, path: str, errors: list[str]) -> str:
    value = obj.get(key)
    if not isinstance(value, str):
        if key in obj:
            errors.append(f"{path}.{key}: expected string, got {type(value).__name__}")
        return ""
    return value


def _get_dict(obj: dict, key: str, path: str, errors: list[str]) -> dict:
    value = obj.get(key)
    if not isinstance(value, dict):
        if key in obj:
            errors.append(f"{path}.{key}: expected object, got {type(value).__name__}")
        return {}
    return value


def _parse_point(obj, path: str, errors: list[str]) -> tuple[float, float]:
    if (
        not isinstance(obj, list)
        or len(obj) != 2
        or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in obj)
    ):
        errors.append(f"{path}: expected [x, y] numbers")
        return (0.0, 0.0)
    return (float(obj[0]), float(obj[1]))


def _parse_rect(obj: dict, path: str, errors: list[str]) -> Rect:
    _check_keys(obj, ("x_min", "y_min", "x_max", "y_max"), path, errors)
    return Rect(
        x_min=_get_number(obj, "x_min", path, errors),
        y_min=_get_number(obj, "y_min", path, errors),
        x_max=_get_number(obj, "x_max", path, errors),
        y_max=_get_number(obj, "y_max", path, errors),
    )


def _parse_obstacle(obj: dict, path: str, errors: list[str]) -> Obstacle:
    shape = _get_str(obj, "shape", path, errors)
    if shape == "circle":
        _check_keys(obj, ("shape", "center", "radius"), path, errors)
        return Obstacle(
            shape="circle",
            center=_parse_point(obj.get("center"), f"{path}.center", errors),
            radius=_get_number(obj, "radius", path, errors),
        )
    if shape == "rectangle":
        _check_keys(obj, ("shape", "center", "half_extents"), path, errors)
        hx, hy = _parse_point(obj.get("half_extents"), f"{path}.half_extents", errors)
        return Obstacle(
            shape="rectangle",
            center=_parse_point(obj.get("center"), f"{path}.center", errors),
            half_extents=(hx, hy),
        )
    errors.append(f"{path}.shape: expected 'circle' or 'rectangle'")
    return Obstacle(shape="circle", center=(0.0, 0.0), radius=1.0)


def parse_config(text: str, *, validate: bool = True) -> EnvConfig:
    """Parse a JSON config document into an EnvConfig.

    Raises ConfigError for structural problems (every problem listed with its
    JSON path) and, when `validate` is true, InvalidConfigError if the parsed
    document violates any config invariant.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"$: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("$: expected top-level object")

    errors: list[str] = []
    _check_keys(doc, ("players", "site", "task"), "$", errors)

    players_obj = _get_dict(doc, "players", "$", errors)
    _check_keys(
        players_obj,
        (
            "num_p",
            "num_e",
            "num_ctrl",
            "num_unctrl",
            "random_respawn",
            "respawn_region",
            "reception_range",
            "velocity_p",
            "velocity_e",
            "unseen_drones",
        ),
        "$.players",
        errors,
    )
    region_obj = _get_dict(players_obj, "respawn_region", "$.players", errors)
    _check_keys(region_obj, ("pursuer", "evader"), "$.players.respawn_region", errors)
    unseen = players_obj.get("unseen_drones", [])
    if not isinstance(unseen, list) or any(not isinstance(s, str) for s in unseen):
        errors.append("$.players.unseen_drones: expected array of strings")
        unseen = []
    players = PlayersCfg(
        num_p=_get_int(players_obj, "num_p", "$.players", errors),
        num_e=_get_int(players_obj, "num_e", "$.players", errors),
        num_ctrl=_get_int(players_obj, "num_ctrl", "$.players", errors),
        num_unctrl=_get_int(players_obj, "num_unctrl", "$.players", errors),
        random_respawn=_get_bool(players_obj, "random_respawn", "$.players", errors),
        respawn_region=RespawnRegion(
            pursuer=_parse_rect(
                _get_dict(region_obj, "pursuer", "$.players.respawn_region", errors),
                "$.players.respawn_region.pursuer",
                errors,
            ),
            evader=_parse_rect(
                _get_dict(region_obj, "evader", "$.players.respawn_region", errors),
                "$.players.respawn_region.evader",
                errors,
            ),
        ),
        reception_range=_get_number(players_obj, "reception_range", "$.players", errors),
        velocity_p=_get_number(players_obj, "velocity_p", "$.players", errors),
        velocity_e=_get_number(players_obj, "velocity_e", "$.players", errors),
        unseen_drones=tuple(unseen),
    )

    site_obj = _get_dict(doc, "site", "$", errors)
    _check_keys(site_obj, ("boundary", "obstacles"), "$.site", errors)
    boundary_obj = _get_dict(site_obj, "boundary", "$.site", errors)
    _check_keys(boundary_obj, ("width", "height"), "$.site.boundary", errors)
    obstacles_obj = _get_dict(site_obj, "obstacles", "$.site", errors)
    obstacles = tuple(
        _parse_obstacle(
            _get_dict(obstacles_obj, key, "$.site.obstacles", errors),
            f"$.site.obstacles.{key}",
            errors,
        )
        for key in obstacles_obj
    )
    site = SiteCfg(
        boundary_width=_get_number(boundary_obj, "width", "$.site.boundary", errors),
        boundary_height=_get_number(boundary_obj, "height", "$.site.boundary", errors),
        obstacles=obstacles,
    )

    task_obj = _get_dict(doc, "task", "$", errors)
    _check_keys(
        task_obj,
        ("task_name", "capture_range", "safe_radius", "task_horizon", "fps"),
        "$.task",
        errors,
    )
    task = TaskCfg(
        task_name=_get_str(task_obj, "task_name", "$.task", errors),
        capture_range=_get_number(task_obj, "capture_range", "$.task", errors),
        safe_radius=_get_number(task_obj, "safe_radius", "$.task", errors),
        task_horizon=_get_int(task_obj, "task_horizon", "$.task", errors),
        fps=_get_number(task_obj, "fps", "$.task", errors),
    )

    if errors:
        raise ConfigError("\n".join(errors))

    cfg = EnvConfig(players=players, site=site, task=task)
    if validate:
        violations = validate_config(cfg)
        if violations:
            raise InvalidConfigError(violations)
    return cfg


def serialize_config(cfg: EnvConfig) -> str:
    """Canonical JSON for an EnvConfig; parse_config(serialize_config(c)) == c."""
    obstacles = {}
    for i, ob in enumerate(cfg.site.obstacles, start=1):
        entry: dict = {"shape": ob.shape, "center": list(ob.center)}
        if ob.shape == "circle":
            entry["radius"] = ob.radius
        else:
            entry["half_extents"] = list(ob.half_extents)
        obstacles[f"obstacle{i}"] = entry
    doc = {
        "players": {
            "num_p": cfg.players.num_p,
            "num_e": cfg.players.num_e,
            "num_ctrl": cfg.players.num_ctrl,
            "num_unctrl": cfg.players.num_unctrl,
            "random_respawn": cfg.players.random_respawn,
            "respawn_region": {
                "pursuer": _rect_to_json(cfg.players.respawn_region.pursuer),
                "evader": _rect_to_json(cfg.players.respawn_region.evader),
            },
            "reception_range": cfg.players.reception_range,
            "velocity_p": cfg.players.velocity_p,
            "velocity_e": cfg.players.velocity_e,
            "unseen_drones": list(cfg.players.unseen_drones),
        },
        "site": {
            "boundary": {"width": cfg.site.boundary_width, "height": cfg.site.boundary_height},
            "obstacles": obstacles,
        },
        "task": {
            "task_name": cfg.task.task_name,
            "capture_range": cfg.task.capture_range,
            "safe_radius": cfg.task.safe_radius,
            "task_horizon": cfg.task.task_horizon,
            "fps": cfg.task.fps,
        },
    }
    return json.dumps(doc, indent=2) + "\n"


def _rect_to_json(r: Rect) -> dict:
    return {"x_min": r.x_min, "y_min": r.y_min, "x_max": r.x_max, "y_max": r.y_max}


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def _rect_inside_boundary(r: Rect, width: float, height: float) -> bool:
    return 0.0 <= r.x_min < r.x_max <= width and 0.0 <= r.y_min < r.y_max <= height


def _obstacle_inside_boundary(ob: Obstacle, width: float, height: float) -> bool:
    cx, cy = ob.center
    if ob.shape == "circle":
        r = ob.radius or 0.0
        return r <= cx <= width - r and r <= cy <= height - r
    hx, hy = ob.half_extents or (0.0, 0.0)
    return hx <= cx <= width - hx and hy <= cy <= height - hy


def _region_hits_obstacle(region: Rect, ob: Obstacle, inflation: float) -> bool:
    if ob.shape == "circle":
        return geometry.rect_circle_intersect(region.as_tuple(), ob.center[0], ob.center[1], ob.radius + inflation)
    hx, hy = ob.half_extents
    inflated = (
        ob.center[0] - hx - inflation,
        ob.center[1] - hy - inflation,
        ob.center[0] + hx + inflation,
        ob.center[1] + hy + inflation,
    )
    return geometry.rects_intersect(region.as_tuple(), inflated)


def validate_config(cfg: EnvConfig) -> list[str]:
    """Return every violated invariant (empty list means valid)."""
    v: list[str] = []
    p, s, t = cfg.players, cfg.site, cfg.task

    if p.num_p < 1:
        v.append("num_p must be >= 1")
    if p.num_e < 1:
        v.append("num_e must be >= 1")
    if p.num_ctrl < 0 or p.num_unctrl < 0:
        v.append("num_ctrl and num_unctrl must be >= 0")
    if p.num_ctrl + p.num_unctrl != p.num_p:
        v.append("num_ctrl+num_unctrl != num_p")
    if p.reception_range <= 0:
        v.append("reception_range must be positive")
    if p.velocity_p <= 0:
        v.append("velocity_p must be positive")
    if p.velocity_e <= 0:
        v.append("velocity_e must be positive")
    if p.num_unctrl > 0 and not p.unseen_drones:
        v.append("unseen_drones must be nonempty when num_unctrl > 0")
    if p.num_unctrl == 0 and p.unseen_drones:
        v.append("unseen_drones must be empty when num_unctrl == 0")
    for name in p.unseen_drones:
        if name not in SCRIPTED_POLICY_IDS and not name.startswith("ckpt:"):
            v.append(f"unknown unseen_drones policy id: {name}")

    if s.boundary_width <= 0:
        v.append("boundary width must be positive")
    if s.boundary_height <= 0:
        v.append("boundary height must be positive")
    for i, ob in enumerate(s.obstacles, start=1):
        if ob.shape == "circle" and (ob.radius is None or ob.radius <= 0):
            v.append(f"obstacle{i}: radius must be positive")
        if ob.shape == "rectangle" and (
            ob.half_extents is None or ob.half_extents[0] <= 0 or ob.half_extents[1] <= 0
        ):
            v.append(f"obstacle{i}: half_extents must be positive")
        if s.boundary_width > 0 and s.boundary_height > 0:
            if not _obstacle_inside_boundary(ob, s.boundary_width, s.boundary_height):
                v.append(f"obstacle{i}: obstacle outside boundary")

    for label, region in (("pursuer", p.respawn_region.pursuer), ("evader", p.respawn_region.evader)):
        if region.width <= 0 or region.height <= 0:
            v.append(f"{label} respawn region is empty")
        elif s.boundary_width > 0 and s.boundary_height > 0:
            if not _rect_inside_boundary(region, s.boundary_width, s.boundary_height):
                v.append(f"{label} respawn region outside boundary")
            for i, ob in enumerate(s.obstacles, start=1):
                if _region_hits_obstacle(region, ob, t.safe_radius):
                    v.append(f"{label} respawn region intersects obstacle{i}")

    if t.capture_range <= 0:
        v.append("capture_range must be positive")
    if t.safe_radius <= 0:
        v.append("safe_radius must be positive")
    if t.task_horizon < 1:
        v.append("task_horizon must be >= 1")
    if t.fps <= 0:
        v.append("fps must be positive")
    return v


# ---------------------------------------------------------------------------
# Built-in environments
# ---------------------------------------------------------------------------

def builtin_env_text(name: str) -> str:
    """Raw JSON bytes (as text) of a built-in environment config."""
    if name not in BUILTIN_ENV_NAMES:
        raise KeyError(f"unknown built-in env {name!r}; choose from {BUILTIN_ENV_NAMES}")
    return resources.files("pursuit_lab").joinpath(f"config_data/{name}.json").read_text("utf-8")


@lru_cache(maxsize=None)
def builtin_env(name: str) -> EnvConfig:
    """One of the four shipped arenas: 4p2e3o, 4p2e1o, 4p2e5o, 4p3e5o."""
    return parse_config(builtin_env_text(name))


def schema_text() -> str:
    """The published JSON-Schema document for config files."""
    return resources.files("pursuit_lab").joinpath("config_data/env_config.schema.json").read_text("utf-8")


# ---------------------------------------------------------------------------
# Override helpers (EnvConfig is immutable; trainers derive variants)
# ---------------------------------------------------------------------------

def with_control_split(cfg: EnvConfig, num_ctrl: int, num_unctrl: int, unseen_drones: tuple[str, ...] = ()) -> EnvConfig:
    players = replace(
        cfg.players, num_ctrl=num_ctrl, num_unctrl=num_unctrl, unseen_drones=tuple(unseen_drones)
    )
    return replace(cfg, players=players)


def with_task_horizon(cfg: EnvConfig, horizon: int) -> EnvConfig:
    return replace(cfg, task=replace(cfg.task, task_horizon=horizon))


def with_velocities(cfg: EnvConfig, velocity_p: float | None = None, velocity_e: float | None = None) -> EnvConfig:
    players = cfg.players
    if velocity_p is not None:
        players = replace(players, velocity_p=velocity_p)
    if velocity_e is not None:
        players = replace(players, velocity_e=velocity_e)
    return replace(cfg, players=players)


def config_digest(cfg: EnvConfig) -> str:
    """Stable content hash of a config, used in cache keys and manifests."""
    import hashlib

    return hashlib.sha256(serialize_config(cfg).encode("utf-8")).hexdigest()[:16]

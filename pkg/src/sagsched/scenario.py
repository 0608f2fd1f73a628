"""Scenario files: hierarchical YAML describing APs, users, channels, link
parameters, reward weights, and training defaults.

`load_scenario` / `ScenarioConfig.from_dict` validate the raw mapping;
`build_scenario` materializes the immutable runtime bundle (topology +
energy table) the environment and the CLI consume.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import yaml

from .env import NetworkEnv, RewardWeights
from .errors import ConfigurationError
from .metrics import config_hash_of
from .radio import EnergyTable, LinkParams, build_energy_table
from .topology import AccessPoint, ApKind, Topology, UserNode, build_topology

_KIND_NAMES = {
    "satellite": ApKind.SATELLITE,
    "uav": ApKind.UAV,
    "base_station": ApKind.BASE_STATION,
}


@dataclass(frozen=True)
class ApSpec:
    kind: str
    position: Tuple[float, float, float]
    radius_m: float
    delay_frames: Optional[int] = None

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "position": list(self.position),
             "radius_m": self.radius_m}
        if self.delay_frames is not None:
            d["delay_frames"] = self.delay_frames
        return d


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    n_channels: int
    aps: Tuple[ApSpec, ...]
    users: dict  # explicit positions or a generator spec
    frame_len_s: float = 1e-3
    link: dict = field(default_factory=dict)
    weights: dict = field(default_factory=lambda: {"aoi": 0.5, "energy": 0.5})
    episode_len: int = 1000
    arrival_offset: int = 0
    train: dict = field(default_factory=dict)
    source_text: Optional[str] = None  # original file text, echoed verbatim

    @classmethod
    def from_dict(cls, data: dict, source_text: Optional[str] = None) -> "ScenarioConfig":
        if not isinstance(data, dict):
            raise ConfigurationError("scenario must be a mapping")
        for key in ("name", "channels", "aps", "users"):
            if key not in data:
                raise ConfigurationError(f"scenario missing required key {key!r}")
        known = {"name", "channels", "aps", "users", "frame_len_s", "link",
                 "reward_weights", "episode_len", "arrival_offset", "train"}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown scenario keys: {sorted(unknown)}")
        n_channels = data["channels"]
        if not isinstance(n_channels, int) or n_channels < 1:
            raise ConfigurationError("channels must be a positive integer")
        aps = []
        for i, raw in enumerate(data["aps"]):
            kind = raw.get("kind")
            if kind not in _KIND_NAMES:
                raise ConfigurationError(
                    f"ap {i}: kind must be one of {sorted(_KIND_NAMES)}")
            pos = raw.get("position")
            if not (isinstance(pos, (list, tuple)) and len(pos) == 3):
                raise ConfigurationError(f"ap {i}: position must be [x, y, z]")
            aps.append(ApSpec(kind=kind, position=tuple(float(v) for v in pos),
                              radius_m=float(raw.get("radius_m", 0)),
                              delay_frames=raw.get("delay_frames")))
        users = data["users"]
        if not isinstance(users, dict) or "mode" not in users:
            raise ConfigurationError("users must be a mapping with a 'mode'")
        if users["mode"] not in ("explicit", "grid", "uniform"):
            raise ConfigurationError(f"unknown user mode {users['mode']!r}")
        cfg = cls(
            name=str(data["name"]),
            n_channels=n_channels,
            aps=tuple(aps),
            users=users,
            frame_len_s=float(data.get("frame_len_s", 1e-3)),
            link=dict(data.get("link", {})),
            weights=dict(data.get("reward_weights", {"aoi": 0.5, "energy": 0.5})),
            episode_len=int(data.get("episode_len", 1000)),
            arrival_offset=int(data.get("arrival_offset", 0)),
            train=dict(data.get("train", {})),
            source_text=source_text,
        )
        if cfg.episode_len < 1:
            raise ConfigurationError("episode_len must be positive")
        if cfg.arrival_offset not in (0, 1):
            raise ConfigurationError("arrival_offset must be 0 or 1")
        return cfg

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "channels": self.n_channels,
            "frame_len_s": self.frame_len_s,
            "aps": [ap.to_dict() for ap in self.aps],
            "users": self.users,
            "link": self.link,
            "reward_weights": self.weights,
            "episode_len": self.episode_len,
            "arrival_offset": self.arrival_offset,
            "train": self.train,
        }

    def canonical_text(self) -> str:
        if self.source_text is not None:
            return self.source_text
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    def config_hash(self) -> str:
        return config_hash_of(self.canonical_text())


def load_scenario(path) -> ScenarioConfig:
    with open(path) as fh:
        text = fh.read()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"cannot parse scenario file: {exc}") from exc
    return ScenarioConfig.from_dict(data, source_text=text)


def generate_users(spec: dict) -> List[UserNode]:
    mode = spec["mode"]
    if mode == "explicit":
        positions = spec.get("positions")
        if not positions:
            raise ConfigurationError("explicit user mode needs 'positions'")
        return [UserNode(index=i + 1, position=tuple(float(v) for v in p))
                for i, p in enumerate(positions)]
    if mode == "grid":
        count = int(spec.get("count", 0))
        cols = int(spec.get("cols", max(count, 1)))
        origin = spec.get("origin", [0.0, 0.0])
        spacing = float(spec.get("spacing", 100.0))
        users = []
        for i in range(count):
            r, c = divmod(i, cols)
            users.append(UserNode(index=i + 1, position=(
                float(origin[0]) + c * spacing, float(origin[1]) + r * spacing, 0.0)))
        return users
    if mode == "uniform":
        count = int(spec.get("count", 0))
        seed = int(spec.get("seed", 0))
        extent = spec.get("extent", [0.0, 2000.0, 0.0, 2000.0])
        rng = np.random.default_rng(seed)
        xs = rng.uniform(extent[0], extent[1], count)
        ys = rng.uniform(extent[2], extent[3], count)
        return [UserNode(index=i + 1, position=(float(xs[i]), float(ys[i]), 0.0))
                for i in range(count)]
    raise ConfigurationError(f"unknown user mode {mode!r}")


@dataclass(frozen=True)
class Scenario:
    """Runtime bundle: everything the environment and harness consume."""

    config: ScenarioConfig
    topology: Topology
    energy_table: EnergyTable
    link: LinkParams
    weights: RewardWeights

    @property
    def n_channels(self) -> int:
        return self.config.n_channels

    @property
    def episode_len(self) -> int:
        return self.config.episode_len


def build_scenario(cfg: ScenarioConfig) -> Scenario:
    users = generate_users(cfg.users)
    if not users:
        raise ConfigurationError("scenario has no users")
    aps = []
    for i, spec in enumerate(cfg.aps):
        aps.append(AccessPoint(index=i, kind=_KIND_NAMES[spec.kind],
                               position=spec.position, radius_m=spec.radius_m,
                               delay_frames=spec.delay_frames))
    topology = build_topology(aps, users, cfg.frame_len_s)
    link = LinkParams(
        bandwidth_hz=float(cfg.link.get("bandwidth_hz", 1e6)),
        noise_power_w=float(cfg.link.get("noise_power_w", 1e-13)),
        payload_bits=float(cfg.link.get("payload_bits", 3000.0)),
        frame_len_s=cfg.frame_len_s,
    )
    energy = build_energy_table(topology, link)
    weights = RewardWeights(aoi=float(cfg.weights.get("aoi", 0.5)),
                            energy=float(cfg.weights.get("energy", 0.5)))
    return Scenario(config=cfg, topology=topology, energy_table=energy,
                    link=link, weights=weights)


def make_env(scenario: Scenario, observation_mode: str = "delayed") -> NetworkEnv:
    return NetworkEnv(scenario.topology, scenario.energy_table,
                      scenario.n_channels, scenario.weights,
                      observation_mode=observation_mode,
                      arrival_offset=scenario.config.arrival_offset)

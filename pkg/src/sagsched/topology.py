"""Static world model: access points, users, coverage, and propagation delays.

Everything here is computed once at scenario load and immutable afterwards.
Delays are stored in whole frames (ceil of the continuous delay) because the
simulator indexes time in frames; per-AP overrides take precedence so the
experiment presets can pin delays directly (20/5/1 frames) instead of
deriving them from altitude.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigurationError

SPEED_OF_LIGHT = 299_792_458.0  # m/s


class ApKind(Enum):
    SATELLITE = "satellite"
    UAV = "uav"
    BASE_STATION = "base_station"


@dataclass(frozen=True)
class AccessPoint:
    """One transmitter. Index 0 is the satellite, then UAVs, then BSs."""

    index: int
    kind: ApKind
    position: Tuple[float, float, float]
    radius_m: float
    delay_frames: Optional[int] = None  # override; wins over the distance formula

    def __post_init__(self):
        if self.radius_m <= 0:
            raise ConfigurationError(f"AP {self.index}: radius must be positive")
        if self.kind in (ApKind.SATELLITE, ApKind.UAV) and self.position[2] <= 0:
            raise ConfigurationError(f"AP {self.index}: airborne AP needs altitude > 0")
        if self.delay_frames is not None and self.delay_frames < 0:
            raise ConfigurationError(f"AP {self.index}: delay override must be >= 0")


@dataclass(frozen=True)
class UserNode:
    index: int  # 1-based, dense
    position: Tuple[float, float, float]


@dataclass(frozen=True)
class Topology:
    """APs, users, and the precomputed coverage/delay matrices.

    coverage[k, u-1] is 1 iff AP k covers user u; delay[k, u-1] is the
    propagation delay in frames (0 for every base station row).
    """

    aps: Tuple[AccessPoint, ...]
    users: Tuple[UserNode, ...]
    coverage: np.ndarray = field(repr=False)
    delay: np.ndarray = field(repr=False)

    @property
    def n_aps(self) -> int:
        return len(self.aps)

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def satellite(self) -> AccessPoint:
        return self.aps[0]

    def covered_users(self, k: int) -> np.ndarray:
        """1-based indices of the users AP k covers, ascending."""
        return np.flatnonzero(self.coverage[k]) + 1

    def max_delay(self) -> int:
        return int(self.delay.max(initial=0))


def ground_distance(ap: AccessPoint, user: UserNode) -> float:
    dx = user.position[0] - ap.position[0]
    dy = user.position[1] - ap.position[1]
    return math.hypot(dx, dy)


def slant_distance(ap: AccessPoint, user: UserNode) -> float:
    return math.dist(ap.position, user.position)


def compute_coverage(ap: AccessPoint, user: UserNode) -> int:
    """1 iff the user lies within the AP's ground-level radius (z ignored)."""
    return 1 if ground_distance(ap, user) <= ap.radius_m else 0


def compute_delay_frames(ap: AccessPoint, user: UserNode, frame_len_s: float) -> int:
    """Propagation delay in whole frames; base stations are always 0.

    An explicit per-AP override wins over the distance formula.
    """
    if frame_len_s <= 0:
        raise ConfigurationError("frame length must be positive")
    if ap.kind is ApKind.BASE_STATION:
        return 0
    if ap.delay_frames is not None:
        return ap.delay_frames
    return math.ceil(slant_distance(ap, user) / SPEED_OF_LIGHT / frame_len_s)


def build_topology(aps: Sequence[AccessPoint], users: Sequence[UserNode],
                   frame_len_s: float) -> Topology:
    """Materialize coverage/delay matrices and check the structural invariants."""
    if not aps or aps[0].kind is not ApKind.SATELLITE:
        raise ConfigurationError("scenario must have a satellite at index 0")
    if sum(1 for ap in aps if ap.kind is ApKind.SATELLITE) != 1:
        raise ConfigurationError("exactly one satellite per scenario")
    kinds = [ap.kind for ap in aps]
    n_uav = kinds.count(ApKind.UAV)
    if any(k is not ApKind.UAV for k in kinds[1:1 + n_uav]) or \
       any(k is not ApKind.BASE_STATION for k in kinds[1 + n_uav:]):
        raise ConfigurationError("AP order must be satellite, UAVs, then base stations")
    for i, ap in enumerate(aps):
        if ap.index != i:
            raise ConfigurationError(f"AP index {ap.index} out of order (expected {i})")
    for j, user in enumerate(users):
        if user.index != j + 1:
            raise ConfigurationError("user indices must be 1..U dense")

    n_aps, n_users = len(aps), len(users)
    coverage = np.zeros((n_aps, n_users), dtype=np.int8)
    delay = np.zeros((n_aps, n_users), dtype=np.int64)
    for k, ap in enumerate(aps):
        for j, user in enumerate(users):
            if compute_coverage(ap, user):
                coverage[k, j] = 1
                delay[k, j] = compute_delay_frames(ap, user, frame_len_s)

    if not coverage[0].all():
        missing = np.flatnonzero(coverage[0] == 0) + 1
        raise ConfigurationError(f"satellite must cover all users; missing {missing.tolist()}")
    orphans = np.flatnonzero(coverage.sum(axis=0) == 0) + 1
    if orphans.size:  # unreachable with a valid satellite row, kept as a guard
        raise ConfigurationError(f"users outside every AP's coverage: {orphans.tolist()}")
    airborne = [k for k, ap in enumerate(aps) if ap.kind is not ApKind.BASE_STATION]
    for k in airborne:
        bad = np.flatnonzero((coverage[k] == 1) & (delay[k] < 1)) + 1
        if bad.size:
            raise ConfigurationError(
                f"AP {k} is airborne but has zero-frame delay to users {bad.tolist()}")

    coverage.setflags(write=False)
    delay.setflags(write=False)
    return Topology(aps=tuple(aps), users=tuple(users), coverage=coverage, delay=delay)

"""Link-level models: channel gains, power compensation, per-frame energy.

Gains are deterministic pure-distance formulas: free space for the aerial
layer, the 128.1 + 37.6*log10(d_km) urban model for the ground layer. The
transmit power is compensated so exactly ``payload_bits`` fit one frame at
Shannon capacity; the satellite is solar-powered and charged zero energy.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .topology import ApKind, Topology, slant_distance, SPEED_OF_LIGHT

# exponent above which 2**x would dwarf float range; payload is infeasible
_MAX_RATE_EXPONENT = 500.0


@dataclass(frozen=True)
class LinkParams:
    bandwidth_hz: float = 1e6
    noise_power_w: float = 1e-13
    payload_bits: float = 3000.0
    frame_len_s: float = 1e-3

    def __post_init__(self):
        for name in ("bandwidth_hz", "noise_power_w", "frame_len_s"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"link parameter {name} must be positive")
        if self.payload_bits < 0:
            raise ConfigurationError("payload_bits must be nonnegative")


def gain_free_space(distance_m: float) -> float:
    """Free-space gain (c / (4*pi*d))^2; strictly decreasing in distance."""
    if distance_m <= 0:
        raise ConfigurationError("distance must be positive")
    return (SPEED_OF_LIGHT / (4.0 * math.pi * distance_m)) ** 2


def gain_cost231_db(distance_m: float) -> float:
    """Urban path loss in dB, distance converted to km before the log."""
    if distance_m <= 0:
        raise ConfigurationError("distance must be positive")
    return 128.1 + 37.6 * math.log10(distance_m / 1000.0)


def gain_cost231(distance_m: float) -> float:
    """Linear gain 10^(-loss/10) for the urban model."""
    return 10.0 ** (-gain_cost231_db(distance_m) / 10.0)


def compensated_power(link: LinkParams, gain: float) -> float:
    """Transmit power delivering exactly the payload in one frame.

    p = (2^(S / (B*dt)) - 1) * sigma^2 / g. A payload that would overflow the
    exponential is a configuration error, not a numerical accident.
    """
    if gain <= 0:
        raise ConfigurationError("gain must be positive")
    exponent = link.payload_bits / (link.bandwidth_hz * link.frame_len_s)
    if exponent > _MAX_RATE_EXPONENT:
        raise ConfigurationError(
            f"payload of {link.payload_bits} bits infeasible in one frame "
            f"(rate exponent {exponent:.1f})")
    return (2.0 ** exponent - 1.0) * link.noise_power_w / gain


def rate_bits_per_s(link: LinkParams, power_w: float, gain: float) -> float:
    """Shannon rate B*log2(1 + p*g/sigma^2); used by the round-trip check."""
    return link.bandwidth_hz * math.log2(1.0 + power_w * gain / link.noise_power_w)


@dataclass(frozen=True)
class EnergyTable:
    """Joules per transmitted frame, indexed [ap, user-1].

    Satellite row is all zeros; uncovered pairs hold +inf so a lookup for a
    pair that must never be scheduled is unmistakable.
    """

    e: np.ndarray

    def energy(self, ap: int, user: int) -> float:
        return float(self.e[ap, user - 1])

    def to_csv(self, path) -> None:
        n_aps, n_users = self.e.shape
        with open(path, "w") as fh:
            fh.write("ap," + ",".join(f"user_{u}" for u in range(1, n_users + 1)) + "\n")
            for k in range(n_aps):
                fh.write(str(k) + "," + ",".join(repr(v) for v in self.e[k]) + "\n")


def build_energy_table(topology: Topology, link: LinkParams) -> EnergyTable:
    """Per-frame transmit energy for every covered (AP, user) pair."""
    e = np.full((topology.n_aps, topology.n_users), np.inf)
    for k, ap in enumerate(topology.aps):
        for j, user in enumerate(topology.users):
            if not topology.coverage[k, j]:
                continue
            if ap.kind is ApKind.SATELLITE:
                e[k, j] = 0.0
                continue
            dist = slant_distance(ap, user)
            gain = gain_free_space(dist) if ap.kind is ApKind.UAV else gain_cost231(dist)
            e[k, j] = compensated_power(link, gain) * link.frame_len_s
    e.setflags(write=False)
    return EnergyTable(e=e)

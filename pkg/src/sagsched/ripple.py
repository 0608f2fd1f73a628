"""Delayed-interference engine.

Airborne transmitters reach their users whole frames after launch, so packets
sent in different frames can land on the same user and channel in the same
frame and destroy each other. This module tracks every in-flight packet,
advances it frame by frame, merges same-frame base-station deliveries, and
reports collisions per (user, channel) cell.

Timing: a packet launched at frame t0 with delay d arrives during frame
t0 + d (base stations have d = 0, i.e. same-frame delivery). A scenario knob
``arrival_offset = 1`` shifts airborne arrivals one frame earlier for the
alternative reading of the transition indicator; the default is 0.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Set, Tuple

import numpy as np

from .errors import SchedulingError
from .topology import ApKind, Topology

# A joint assignment is an (n_aps, n_channels) int array; entry [k, p] is the
# 1-based user served by AP k on channel p, or 0 for idle.
Assignment = np.ndarray

Cell = Tuple[int, int]  # (user, channel) with channel 1-based


def idle_assignment(n_aps: int, n_channels: int) -> Assignment:
    return np.zeros((n_aps, n_channels), dtype=np.int64)


def validate_assignment(assignment: Assignment, topology: Topology,
                        n_channels: int) -> List[str]:
    """Range-check a joint assignment.

    The one-user-per-(AP, channel) rule holds by construction of the encoding,
    so only shape and user-index range can go wrong. Future collisions are
    deliberately not checked here; they are runtime events.
    """
    violations = []
    arr = np.asarray(assignment)
    if arr.shape != (topology.n_aps, n_channels):
        return [f"assignment shape {arr.shape} != ({topology.n_aps}, {n_channels})"]
    if not np.issubdtype(arr.dtype, np.integer):
        return [f"assignment dtype {arr.dtype} is not integral"]
    bad = np.argwhere((arr < 0) | (arr > topology.n_users))
    for k, p in bad:
        violations.append(
            f"ap {k} channel {p + 1}: user index {arr[k, p]} out of range 0..{topology.n_users}")
    return violations


@dataclass
class InFlightPacket:
    ap: int
    user: int
    channel: int  # 1-based
    launch_frame: int
    accum_time: int  # frames since launch; 0 during the launch frame
    total_delay: int


@dataclass(frozen=True)
class Arrival:
    ap: int
    user: int
    channel: int
    launch_frame: int
    content_age: int  # AoI value the packet carries on delivery


@dataclass
class ArrivalReport:
    """Everything that landed during one frame."""

    frame: int
    cells: Dict[Cell, List[Arrival]] = field(default_factory=dict)
    collision_cells: Set[Cell] = field(default_factory=set)
    survivors: List[Arrival] = field(default_factory=list)

    @property
    def interference_count(self) -> int:
        return len(self.collision_cells)


class PropagationLedger:
    """All in-flight airborne packets plus the frame counter.

    Single writer per environment instance. Base-station deliveries never
    enter the ledger; ``launch`` queues them and ``advance`` folds them into
    the same frame's report.
    """

    def __init__(self, arrival_offset: int = 0):
        if arrival_offset not in (0, 1):
            raise SchedulingError("arrival_offset must be 0 or 1")
        self.frame = 0
        self.arrival_offset = arrival_offset
        self.packets: List[InFlightPacket] = []
        self._pending: List[Arrival] = []

    def __len__(self) -> int:
        return len(self.packets)

    def launch(self, assignment: Assignment, topology: Topology) -> None:
        """Register frame-``self.frame`` transmissions.

        Airborne packets go in flight; BS packets (and airborne ones whose
        effective flight time is zero under arrival_offset=1) are queued as
        same-frame arrivals.
        """
        arr = np.asarray(assignment)
        for k in range(arr.shape[0]):
            kind = topology.aps[k].kind
            for p in range(arr.shape[1]):
                u = int(arr[k, p])
                if u == 0:
                    continue
                if not topology.coverage[k, u - 1]:
                    raise SchedulingError(
                        f"ap {k} scheduled uncovered user {u} on channel {p + 1}")
                if kind is ApKind.BASE_STATION:
                    self._pending.append(Arrival(k, u, p + 1, self.frame, 0))
                    continue
                d = int(topology.delay[k, u - 1])
                age = d - 1
                if d - self.arrival_offset == 0:
                    self._pending.append(Arrival(k, u, p + 1, self.frame, age))
                else:
                    self.packets.append(
                        InFlightPacket(k, u, p + 1, self.frame, 0, d))

    def advance(self) -> ArrivalReport:
        """Close out the current frame: propagate, collect arrivals, detect collisions."""
        report = ArrivalReport(frame=self.frame)
        still_flying = []
        for pkt in self.packets:
            if pkt.launch_frame == self.frame:  # launched this frame; first hop is next frame
                still_flying.append(pkt)
                continue
            pkt.accum_time += 1
            if pkt.accum_time == pkt.total_delay - self.arrival_offset:
                report.cells.setdefault((pkt.user, pkt.channel), []).append(
                    Arrival(pkt.ap, pkt.user, pkt.channel, pkt.launch_frame,
                            pkt.total_delay - 1))
            else:
                still_flying.append(pkt)
        self.packets = still_flying

        for arrival in self._pending:
            report.cells.setdefault((arrival.user, arrival.channel), []).append(arrival)
        self._pending = []

        for cell, arrivals in report.cells.items():
            if len(arrivals) >= 2:
                report.collision_cells.add(cell)
            else:
                report.survivors.append(arrivals[0])
        self.frame += 1
        return report

    def arrival_frame(self, pkt: InFlightPacket) -> int:
        return pkt.launch_frame + pkt.total_delay - self.arrival_offset

    def debug_lines(self) -> List[str]:
        """Line-oriented snapshot for trace-diffing: frame k u p v d."""
        return [
            f"{self.frame} {p.ap} {p.user} {p.channel} {p.accum_time} {p.total_delay}"
            for p in self.packets
        ]


def check_ripple_constraint(ledger: PropagationLedger, assignment: Assignment,
                            topology: Topology) -> Set[Cell]:
    """Pure lookahead: (user, channel) cells that will see >= 2 simultaneous arrivals.

    Merges the proposed launches with everything already in flight (and any
    same-frame deliveries already queued) without touching the ledger. Used by
    the collision-free baselines and by tests; the environment itself never
    enforces this.
    """
    events: Dict[Tuple[int, int, int], int] = {}

    def add(user: int, channel: int, frame: int) -> None:
        events[(user, channel, frame)] = events.get((user, channel, frame), 0) + 1

    for pkt in ledger.packets:
        add(pkt.user, pkt.channel, ledger.arrival_frame(pkt))
    for arrival in ledger._pending:
        add(arrival.user, arrival.channel, ledger.frame)

    arr = np.asarray(assignment)
    for k in range(arr.shape[0]):
        kind = topology.aps[k].kind
        for p in range(arr.shape[1]):
            u = int(arr[k, p])
            if u == 0:
                continue
            if kind is ApKind.BASE_STATION:
                add(u, p + 1, ledger.frame)
            else:
                d = int(topology.delay[k, u - 1])
                add(u, p + 1, ledger.frame + d - ledger.arrival_offset)

    return {(u, p) for (u, p, _), count in events.items() if count >= 2}

"""Non-learning baseline policies and the AoI reference bound.

All baselines are collision-free by construction: every candidate launch is
checked against an arrival calendar seeded from the in-flight ledger and
extended with the launches already committed this frame (including those of
lower-indexed APs), so their interference count is identically zero.
"""

from typing import Dict, List, Optional, Tuple

import numpy as np

from .env import NetworkEnv
from .topology import ApKind, Topology


class ArrivalCalendar:
    """Future (user, channel, frame) arrival counts for collision lookahead."""

    def __init__(self):
        self.events: Dict[Tuple[int, int, int], int] = {}

    @classmethod
    def from_ledger(cls, ledger) -> "ArrivalCalendar":
        cal = cls()
        for pkt in ledger.packets:
            cal.commit(pkt.user, pkt.channel, ledger.arrival_frame(pkt))
        for arrival in ledger._pending:
            cal.commit(arrival.user, arrival.channel, ledger.frame)
        return cal

    def commit(self, user: int, channel: int, frame: int) -> None:
        key = (user, channel, frame)
        self.events[key] = self.events.get(key, 0) + 1

    def would_collide(self, user: int, channel: int, frame: int) -> bool:
        return self.events.get((user, channel, frame), 0) >= 1


def _arrival_frame(topology: Topology, k: int, user: int, frame: int,
                   arrival_offset: int) -> int:
    if topology.aps[k].kind is ApKind.BASE_STATION:
        return frame
    return frame + int(topology.delay[k, user - 1]) - arrival_offset


def round_robin_act(k: int, cursor: int, topology: Topology, n_channels: int,
                    calendar: ArrivalCalendar, frame: int,
                    arrival_offset: int = 0) -> Tuple[np.ndarray, int]:
    """Serve the next covered users in cyclic order, one per channel.

    A user already given a channel this frame is never given a second one;
    a launch the calendar flags is skipped (that channel tries the next
    candidate). The cursor only advances past committed users.
    """
    covered = topology.covered_users(k)
    row = np.zeros(n_channels, dtype=np.int64)
    if covered.size == 0:
        return row, cursor
    n = covered.size
    used = set()
    for p in range(n_channels):
        for j in range(n):
            idx = (cursor + j) % n
            u = int(covered[idx])
            if u in used:
                continue
            t_arr = _arrival_frame(topology, k, u, frame, arrival_offset)
            if calendar.would_collide(u, p + 1, t_arr):
                continue
            row[p] = u
            used.add(u)
            calendar.commit(u, p + 1, t_arr)
            cursor = (idx + 1) % n
            break
    return row, cursor


def priority_act(k: int, observed_y: np.ndarray, topology: Topology,
                 n_channels: int, calendar: ArrivalCalendar, frame: int,
                 arrival_offset: int = 0) -> np.ndarray:
    """Serve covered users in descending observed-age order (ties: lower
    user index first), one per channel, skipping flagged launches."""
    covered = topology.covered_users(k)
    row = np.zeros(n_channels, dtype=np.int64)
    if covered.size == 0:
        return row
    order = sorted(range(covered.size), key=lambda i: (-observed_y[i], covered[i]))
    used = set()
    for p in range(n_channels):
        for i in order:
            u = int(covered[i])
            if u in used:
                continue
            t_arr = _arrival_frame(topology, k, u, frame, arrival_offset)
            if calendar.would_collide(u, p + 1, t_arr):
                continue
            row[p] = u
            used.add(u)
            calendar.commit(u, p + 1, t_arr)
            break
    return row


def random_act(k: int, rng: np.random.Generator, topology: Topology,
               n_channels: int, calendar: ArrivalCalendar, frame: int,
               arrival_offset: int = 0) -> np.ndarray:
    """Uniform pick of idle-or-covered-user per channel; flagged or duplicate
    picks fall back to idle so the baseline stays collision-free."""
    covered = topology.covered_users(k)
    row = np.zeros(n_channels, dtype=np.int64)
    choices = np.concatenate(([0], covered))
    used = set()
    for p in range(n_channels):
        u = int(choices[rng.integers(len(choices))])
        if u == 0 or u in used:
            continue
        t_arr = _arrival_frame(topology, k, u, frame, arrival_offset)
        if calendar.would_collide(u, p + 1, t_arr):
            continue
        row[p] = u
        used.add(u)
        calendar.commit(u, p + 1, t_arr)
    return row


class _BaselinePolicy:
    def __init__(self, topology: Topology, n_channels: int,
                 arrival_offset: int = 0):
        self.topology = topology
        self.n_channels = n_channels
        self.arrival_offset = arrival_offset

    def start_episode(self) -> None:
        pass

    def plan(self, env: NetworkEnv) -> np.ndarray:
        calendar = ArrivalCalendar.from_ledger(env.ledger)
        frame = env.state.frame
        joint = np.zeros((self.topology.n_aps, self.n_channels), dtype=np.int64)
        for k in range(self.topology.n_aps):
            joint[k] = self._row(k, env, calendar, frame)
        return joint

    def _row(self, k, env, calendar, frame):
        raise NotImplementedError


class RoundRobinPolicy(_BaselinePolicy):
    def __init__(self, topology, n_channels, arrival_offset=0):
        super().__init__(topology, n_channels, arrival_offset)
        self.cursors = [0] * topology.n_aps

    def start_episode(self) -> None:
        self.cursors = [0] * self.topology.n_aps

    def _row(self, k, env, calendar, frame):
        row, self.cursors[k] = round_robin_act(
            k, self.cursors[k], self.topology, self.n_channels, calendar,
            frame, self.arrival_offset)
        return row


class PriorityPolicy(_BaselinePolicy):
    """Highest observed age first, using each AP's own (possibly delayed) view."""

    def _row(self, k, env, calendar, frame):
        y = env.observation.per_ap[k].y
        return priority_act(k, y, self.topology, self.n_channels, calendar,
                            frame, self.arrival_offset)


class RandomPolicy(_BaselinePolicy):
    def __init__(self, topology, n_channels, seed: int = 0, arrival_offset=0):
        super().__init__(topology, n_channels, arrival_offset)
        self.seed = seed
        self.rng = np.random.default_rng(seed)

    def start_episode(self) -> None:
        self.rng = np.random.default_rng(self.seed)

    def _row(self, k, env, calendar, frame):
        return random_act(k, self.rng, self.topology, self.n_channels,
                          calendar, frame, self.arrival_offset)


class IdlePolicy(_BaselinePolicy):
    def _row(self, k, env, calendar, frame):
        return np.zeros(self.n_channels, dtype=np.int64)


BASELINES = {
    "round-robin": RoundRobinPolicy,
    "priority": PriorityPolicy,
    "random": RandomPolicy,
    "idle": IdlePolicy,
}


def make_baseline(name: str, topology: Topology, n_channels: int,
                  seed: int = 0, arrival_offset: int = 0):
    if name not in BASELINES:
        raise KeyError(name)
    if name == "random":
        return RandomPolicy(topology, n_channels, seed, arrival_offset)
    return BASELINES[name](topology, n_channels, arrival_offset)


def aoi_lower_bound(topology: Topology, n_channels: int,
                    horizon: int = 1000) -> Tuple[np.ndarray, float]:
    """Reference lower bound on total time-averaged age over a zero-start
    horizon.

    Capacity counting: per frame, each BS can reset up to P users to age 0
    and each airborne AP can refresh up to P users down to its best delay, so
    at most cum(m) users can show age <= m-1 at any frame; the i-th freshest
    user therefore sits at age >= g(i). Users no BS reaches additionally obey
    the hard floor age(t) >= min(t, d_min). Averaging min(t, g) over the
    horizon accounts for the all-zero start. Returned per-user values for
    BS-covered users are a nominal allocation of the rank floors in user
    order; only the total is meaningful as a reference line.
    """
    n_users = topology.n_users
    if n_users == 0:
        raise ValueError("no users")
    if horizon < 1:
        raise ValueError("horizon must be positive")
    bs_rows = [k for k, ap in enumerate(topology.aps)
               if ap.kind is ApKind.BASE_STATION]
    air_rows = [k for k, ap in enumerate(topology.aps)
                if ap.kind is not ApKind.BASE_STATION]

    bs_covered = np.zeros(n_users, dtype=bool)
    for k in bs_rows:
        bs_covered |= topology.coverage[k].astype(bool)

    air_floor = []  # best refresh level per airborne AP
    for k in air_rows:
        cov = topology.coverage[k].astype(bool)
        if cov.any():
            air_floor.append(int(topology.delay[k][cov].min()))

    def capacity(m: int) -> int:
        c = len(bs_rows) * n_channels
        c += sum(n_channels for d in air_floor if d <= m - 1)
        return c

    n_bs_users = int(bs_covered.sum())
    ranks = []
    cum = 0
    level = 0
    while len(ranks) < n_bs_users:
        cum += capacity(level + 1)
        while len(ranks) < min(cum, n_bs_users):
            ranks.append(level)
        level += 1

    def mean_min(g: int) -> float:
        # (1/T) * sum_{t=0}^{T-1} min(t, g)
        if g >= horizon:
            return (horizon - 1) / 2.0
        return (g * (g - 1) / 2.0 + (horizon - g) * g) / horizon

    per_user = np.zeros(n_users)
    rank_iter = iter(ranks)
    for j in range(n_users):
        if bs_covered[j]:
            per_user[j] = mean_min(next(rank_iter))
        else:
            floors = [int(topology.delay[k, j]) for k in air_rows
                      if topology.coverage[k, j]]
            per_user[j] = mean_min(min(floors))
    return per_user, float(per_user.sum())

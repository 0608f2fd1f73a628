"""Discrete-time scheduling environment.

Holds the world state (per-user information age, in-flight packets, frame
counter), applies joint channel assignments, and emits per-transmitter
partial observations whose age readings are staleness-shifted by each
transmitter's own propagation delay. Also exposes the flat objective used by
the benchmark harness.

Observation modes:
  delayed  -- satellites/UAVs read the age vector lagged by their delay (default)
  instant  -- every AP reads the current age vector (idealized upper bound)
  no-aoi   -- satellites/UAVs see zeros in the age slots (timing vectors only)
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .errors import SchedulingError
from .radio import EnergyTable
from .ripple import (Assignment, ArrivalReport, PropagationLedger,
                     validate_assignment)
from .topology import ApKind, Topology

OBSERVATION_MODES = ("delayed", "instant", "no-aoi")


@dataclass(frozen=True)
class RewardWeights:
    aoi: float = 0.5
    energy: float = 0.5

    def __post_init__(self):
        if self.aoi < 0 or self.energy < 0:
            raise ValueError("reward weights must be nonnegative")


@dataclass
class ApObservation:
    """One AP's partial view: observed ages of covered users plus, for
    airborne APs, the flattened in-flight timing windows."""

    ap: int
    y: np.ndarray
    v: Optional[np.ndarray]
    vec: np.ndarray  # concat(y, v); the actor input


@dataclass
class Observation:
    frame: int
    per_ap: List[ApObservation]
    global_vec: np.ndarray  # concat over APs; the critic input


@dataclass
class FrameStats:
    frame: int
    aoi: np.ndarray            # x(t), pre-transition, per user
    energy_per_ap: np.ndarray  # joules spent this frame, per AP
    interference: int
    reward: float
    ap_rewards: np.ndarray

    @property
    def aoi_sum(self) -> float:
        return float(self.aoi.sum())

    @property
    def energy_total(self) -> float:
        return float(self.energy_per_ap.sum())


@dataclass
class StepOutcome:
    reward: float
    ap_rewards: np.ndarray
    observation: Observation
    stats: FrameStats
    report: ArrivalReport


@dataclass
class WorldState:
    frame: int
    aoi: np.ndarray
    ledger: PropagationLedger
    history: np.ndarray  # ring buffer of past age vectors, depth > max delay
    seed: Optional[int] = None


class NetworkEnv:
    """One environment instance is strictly sequential; run replicas for parallelism."""

    def __init__(self, topology: Topology, energy_table: EnergyTable,
                 n_channels: int, weights: RewardWeights = RewardWeights(),
                 observation_mode: str = "delayed", arrival_offset: int = 0):
        if n_channels < 1:
            raise SchedulingError("need at least one channel")
        if observation_mode not in OBSERVATION_MODES:
            raise SchedulingError(f"unknown observation mode {observation_mode!r}")
        self.topology = topology
        self.energy_table = energy_table
        self.n_channels = n_channels
        self.weights = weights
        self.observation_mode = observation_mode
        self.arrival_offset = arrival_offset

        self._is_bs = np.array([ap.kind is ApKind.BASE_STATION for ap in topology.aps])
        self._airborne = [k for k in range(topology.n_aps) if not self._is_bs[k]]
        # per-AP covered users (1-based) and their delays, ascending user order
        self._covered = [topology.covered_users(k) for k in range(topology.n_aps)]
        self._cov_delays = [topology.delay[k, self._covered[k] - 1]
                            for k in range(topology.n_aps)]
        # flattened timing-window layout per airborne AP: start offset per user
        self._v_offsets = {}
        self._v_len = {}
        for k in self._airborne:
            lens = self._cov_delays[k]
            self._v_offsets[k] = np.concatenate(([0], np.cumsum(lens)[:-1])).astype(int)
            self._v_len[k] = int(lens.sum())
        self._history_depth = topology.max_delay() + 1
        self.state: Optional[WorldState] = None
        self._last_obs: Optional[Observation] = None

    # ------------------------------------------------------------------ api

    @property
    def n_aps(self) -> int:
        return self.topology.n_aps

    @property
    def n_users(self) -> int:
        return self.topology.n_users

    @property
    def ledger(self) -> PropagationLedger:
        return self.state.ledger

    @property
    def observation(self) -> Observation:
        return self._last_obs

    def reset(self, seed: Optional[int] = None) -> Observation:
        """Zero ages, empty ledger, frame 0, history primed with zeros."""
        aoi = np.zeros(self.n_users, dtype=np.int64)
        history = np.zeros((self._history_depth, self.n_users), dtype=np.int64)
        self.state = WorldState(frame=0, aoi=aoi,
                                ledger=PropagationLedger(self.arrival_offset),
                                history=history, seed=seed)
        self._last_obs = self._build_observation()
        return self._last_obs

    def step(self, assignment: Assignment) -> StepOutcome:
        """Apply one joint assignment; returns rewards, stats, and o(t+1)."""
        state = self.state
        if state is None:
            raise SchedulingError("call reset() before step()")
        arr = np.asarray(assignment)
        if (arr.shape != (self.n_aps, self.n_channels)
                or not np.issubdtype(arr.dtype, np.integer)
                or arr.min() < 0 or arr.max() > self.n_users):
            violations = validate_assignment(assignment, self.topology,
                                             self.n_channels)
            raise SchedulingError("; ".join(violations) or "invalid assignment")
        ks, ps = np.nonzero(arr)
        users = arr[ks, ps]
        if not self.topology.coverage[ks, users - 1].all():
            bad = np.flatnonzero(self.topology.coverage[ks, users - 1] == 0)[0]
            raise SchedulingError(
                f"ap {ks[bad]} scheduled uncovered user {users[bad]} "
                f"on channel {ps[bad] + 1}")

        pre_aoi = state.aoi

        state.ledger.launch(arr, self.topology)
        report = state.ledger.advance()

        energy_per_ap = np.zeros(self.n_aps)
        nonsat = ks >= 1  # satellite energy excluded (zero anyway)
        np.add.at(energy_per_ap, ks[nonsat],
                  self.energy_table.e[ks[nonsat], users[nonsat] - 1])
        energy_total = float(energy_per_ap.sum())

        reward = -(self.weights.aoi * float(pre_aoi.sum())
                   + self.weights.energy * energy_total)
        ap_rewards = np.empty(self.n_aps)
        for k in range(self.n_aps):
            y_sum = float(self._reward_y(k).sum())
            if k == 0:
                ap_rewards[k] = -y_sum
            else:
                ap_rewards[k] = -(self.weights.aoi * y_sum
                                  + self.weights.energy * energy_per_ap[k])

        # age transition: BS delivery resets, airborne-only delivery clamps,
        # otherwise +1; collided cells deliver nothing
        new_aoi = pre_aoi + 1
        bs_hit = np.zeros(self.n_users, dtype=bool)
        best_age = np.full(self.n_users, np.iinfo(np.int64).max, dtype=np.int64)
        for a in report.survivors:
            j = a.user - 1
            if self._is_bs[a.ap]:
                bs_hit[j] = True
            elif a.content_age < best_age[j]:
                best_age[j] = a.content_age
        air_hit = (~bs_hit) & (best_age < np.iinfo(np.int64).max)
        new_aoi[air_hit] = np.minimum(pre_aoi[air_hit], best_age[air_hit]) + 1
        new_aoi[bs_hit] = 0

        state.aoi = new_aoi
        state.frame += 1
        state.history[state.frame % self._history_depth] = new_aoi
        self._last_obs = self._build_observation()

        stats = FrameStats(frame=report.frame, aoi=pre_aoi,
                           energy_per_ap=energy_per_ap,
                           interference=report.interference_count,
                           reward=reward, ap_rewards=ap_rewards)
        return StepOutcome(reward=reward, ap_rewards=ap_rewards,
                           observation=self._last_obs, stats=stats, report=report)

    def observe(self, k: int) -> ApObservation:
        return self._last_obs.per_ap[k]

    # ------------------------------------------------------------- internals

    def _aoi_at_lag(self, lags: np.ndarray, users: np.ndarray) -> np.ndarray:
        """x_{u}(t - lag) per (lag, user) pair, zeros before frame 0."""
        t = self.state.frame
        frames = t - lags
        out = np.zeros(len(users), dtype=np.int64)
        valid = frames >= 0
        if valid.any():
            rows = self.state.history[frames[valid] % self._history_depth]
            out[valid] = rows[np.arange(valid.sum()), users[valid] - 1]
        return out

    def _reward_y(self, k: int) -> np.ndarray:
        """Observed-age vector the per-AP reward is paid on (always the
        physical delayed reading, regardless of ablation presentation)."""
        users = self._covered[k]
        if self._is_bs[k]:
            return self.state.aoi[users - 1]
        return self._aoi_at_lag(self._cov_delays[k], users)

    def _presented_y(self, k: int) -> np.ndarray:
        users = self._covered[k]
        if self._is_bs[k]:
            return self.state.aoi[users - 1].astype(np.float64)
        if self.observation_mode == "no-aoi":
            return np.zeros(len(users))
        if self.observation_mode == "instant":
            return self.state.aoi[users - 1].astype(np.float64)
        return self._aoi_at_lag(self._cov_delays[k], users).astype(np.float64)

    def _timing_window(self, k: int) -> np.ndarray:
        """Flattened per-user windows of in-flight elapsed times for AP k."""
        t = self.state.frame
        out = np.zeros(self._v_len[k])
        users = self._covered[k]
        pos = {int(u): i for i, u in enumerate(users)}
        for pkt in self.state.ledger.packets:
            if pkt.ap != k:
                continue
            i = pos[pkt.user]
            d = int(self._cov_delays[k][i])
            slot = pkt.launch_frame - (t - d + 1)
            if 0 <= slot < d:
                out[self._v_offsets[k][i] + slot] = t - pkt.launch_frame
        return out

    def _build_observation(self) -> Observation:
        per_ap = []
        pieces = []
        for k in range(self.n_aps):
            y = self._presented_y(k)
            if self._is_bs[k]:
                v = None
                vec = y
            else:
                v = self._timing_window(k)
                vec = np.concatenate([y, v])
            per_ap.append(ApObservation(ap=k, y=y, v=v, vec=vec))
            pieces.append(vec)
        return Observation(frame=self.state.frame, per_ap=per_ap,
                           global_vec=np.concatenate(pieces))


def mdp_objective(stats: Sequence[FrameStats], weights: RewardWeights) -> float:
    """Finite-horizon objective: weighted sum of time-averaged per-user age
    and per-AP energy. Equals -mean(reward) over the same frames."""
    if not stats:
        raise ValueError("empty stat stream")
    n = len(stats)
    aoi = sum(s.aoi_sum for s in stats) / n
    energy = sum(s.energy_total for s in stats) / n
    return weights.aoi * aoi + weights.energy * energy

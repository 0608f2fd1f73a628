"""Per-episode metric records and the deterministic output files.

Every emitted file is a pure function of (config, seed): wall-clock lives
only in the in-memory RunRecord and console output, never on disk.
"""

import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .env import FrameStats

EPISODES_SCHEMA = "sagsched-episodes-v1"
SMOOTHED_SCHEMA = "sagsched-smoothed-v1"
SUMMARY_FORMAT_VERSION = 1
SMOOTHING_WINDOW = 10  # episodes per smoothed row


@dataclass
class EpisodeRecord:
    episode: int
    frames: int
    reward_mean: float
    ap_reward_means: np.ndarray
    aoi_sum_mean: float           # mean over frames of sum_u x_u(t)
    aoi_user_means: np.ndarray    # per-user time-averaged age
    energy_total: float
    energy_ap_means: np.ndarray   # per-AP mean joules per frame
    interference_total: int


class EpisodeAccumulator:
    """Folds FrameStats into one EpisodeRecord without retaining frames."""

    def __init__(self, n_aps: int, n_users: int):
        self.n_aps = n_aps
        self.frames = 0
        self.reward_sum = 0.0
        self.ap_reward_sums = np.zeros(n_aps)
        self.aoi_user_sums = np.zeros(n_users)
        self.energy_ap_sums = np.zeros(n_aps)
        self.interference = 0

    def add(self, stats: FrameStats) -> None:
        self.frames += 1
        self.reward_sum += stats.reward
        self.ap_reward_sums += stats.ap_rewards
        self.aoi_user_sums += stats.aoi
        self.energy_ap_sums += stats.energy_per_ap
        self.interference += stats.interference

    def finish(self, episode: int) -> EpisodeRecord:
        n = max(self.frames, 1)
        return EpisodeRecord(
            episode=episode,
            frames=self.frames,
            reward_mean=self.reward_sum / n,
            ap_reward_means=self.ap_reward_sums / n,
            aoi_sum_mean=float(self.aoi_user_sums.sum()) / n,
            aoi_user_means=self.aoi_user_sums / n,
            energy_total=float(self.energy_ap_sums.sum()),
            energy_ap_means=self.energy_ap_sums / n,
            interference_total=self.interference,
        )


@dataclass
class RunRecord:
    run_id: str
    config_hash: str
    seed: int
    config_text: str
    command: str
    records: List[EpisodeRecord]
    weights_aoi: float
    weights_energy: float
    extra_summary: dict = field(default_factory=dict)
    wall_clock_s: Optional[float] = None  # never written to disk


def config_hash_of(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def make_run_id(config_hash: str, command: str, seed: int) -> str:
    return f"{config_hash[:10]}-{command}-s{seed}"


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def objective_from_records(records: List[EpisodeRecord], w_aoi: float,
                           w_energy: float) -> float:
    aoi_user = np.mean([r.aoi_user_means for r in records], axis=0)
    energy_ap = np.mean([r.energy_ap_means for r in records], axis=0)
    return w_aoi * float(aoi_user.sum()) + w_energy * float(energy_ap.sum())


def smoothed_rows(records: List[EpisodeRecord], window: int = SMOOTHING_WINDOW):
    """Non-overlapping window means; a 30-episode run yields 3 rows."""
    rows = []
    for start in range(0, len(records) - window + 1, window):
        chunk = records[start:start + window]
        rows.append({
            "window": start // window,
            "first_episode": chunk[0].episode,
            "last_episode": chunk[-1].episode,
            "reward_mean": float(np.mean([r.reward_mean for r in chunk])),
            "aoi_sum_mean": float(np.mean([r.aoi_sum_mean for r in chunk])),
            "energy_total_mean": float(np.mean([r.energy_total for r in chunk])),
            "interference_mean": float(np.mean([r.interference_total for r in chunk])),
        })
    return rows


FRAMES_SCHEMA = "sagsched-frames-v1"


def frame_stats_dtype(n_aps: int, n_users: int) -> np.dtype:
    return np.dtype([
        ("frame", "<i8"), ("aoi", "<i8", (n_users,)),
        ("energy_per_ap", "<f8", (n_aps,)), ("interference", "<i8"),
        ("reward", "<f8"), ("ap_rewards", "<f8", (n_aps,)),
    ])


def frame_stats_to_array(stats) -> np.ndarray:
    """Pack a per-frame stat stream into one structured array."""
    if not stats:
        raise ValueError("empty stat stream")
    arr = np.empty(len(stats),
                   dtype=frame_stats_dtype(len(stats[0].energy_per_ap),
                                           len(stats[0].aoi)))
    for i, s in enumerate(stats):
        arr[i] = (s.frame, s.aoi, s.energy_per_ap, s.interference, s.reward,
                  s.ap_rewards)
    return arr


def write_frame_stats_csv(stats, path) -> None:
    arr = frame_stats_to_array(stats)
    n_users = arr["aoi"].shape[1]
    n_aps = arr["energy_per_ap"].shape[1]
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# {FRAMES_SCHEMA}\n")
        header = (["frame"] + [f"aoi_user_{u}" for u in range(1, n_users + 1)]
                  + [f"energy_ap_{k}" for k in range(n_aps)]
                  + ["interference", "reward"]
                  + [f"ap_reward_{k}" for k in range(n_aps)])
        fh.write(",".join(header) + "\n")
        for row in arr:
            cells = ([str(int(row["frame"]))]
                     + [str(int(v)) for v in row["aoi"]]
                     + [repr(float(v)) for v in row["energy_per_ap"]]
                     + [str(int(row["interference"])), repr(float(row["reward"]))]
                     + [repr(float(v)) for v in row["ap_rewards"]])
            fh.write(",".join(cells) + "\n")


def write_frame_stats_binary(stats, path) -> None:
    """Compact trace for tests: a structured .npy, bit-exact round trip."""
    np.save(path, frame_stats_to_array(stats))


def read_frame_stats_binary(path) -> np.ndarray:
    return np.load(path)


def emit_metrics(run: RunRecord, out_dir) -> None:
    """Write episodes.csv, smoothed.csv, summary.json, and config.echo."""
    os.makedirs(out_dir, exist_ok=True)
    records = run.records
    n_aps = len(records[0].ap_reward_means) if records else 0
    n_users = len(records[0].aoi_user_means) if records else 0

    ep_path = os.path.join(out_dir, "episodes.csv")
    with open(ep_path, "w", newline="\n") as fh:
        fh.write(f"# {EPISODES_SCHEMA}\n")
        header = ["episode", "frames", "reward_mean", "aoi_sum_mean",
                  "energy_total", "interference_total"]
        header += [f"ap_reward_{k}" for k in range(n_aps)]
        header += [f"aoi_user_{u}" for u in range(1, n_users + 1)]
        header += [f"energy_ap_{k}" for k in range(n_aps)]
        fh.write(",".join(header) + "\n")
        for r in records:
            row = [_fmt(r.episode), _fmt(r.frames), _fmt(r.reward_mean),
                   _fmt(r.aoi_sum_mean), _fmt(r.energy_total),
                   _fmt(r.interference_total)]
            row += [_fmt(v) for v in r.ap_reward_means]
            row += [_fmt(v) for v in r.aoi_user_means]
            row += [_fmt(v) for v in r.energy_ap_means]
            fh.write(",".join(row) + "\n")

    sm_path = os.path.join(out_dir, "smoothed.csv")
    with open(sm_path, "w", newline="\n") as fh:
        fh.write(f"# {SMOOTHED_SCHEMA}\n")
        fh.write("window,first_episode,last_episode,reward_mean,"
                 "aoi_sum_mean,energy_total_mean,interference_mean\n")
        for row in smoothed_rows(records):
            fh.write(",".join(_fmt(row[k]) for k in
                              ("window", "first_episode", "last_episode",
                               "reward_mean", "aoi_sum_mean",
                               "energy_total_mean", "interference_mean")) + "\n")

    summary = {
        "format_version": SUMMARY_FORMAT_VERSION,
        "run_id": run.run_id,
        "command": run.command,
        "config_hash": run.config_hash,
        "seed": run.seed,
        "episodes": len(records),
        "reward_mean": float(np.mean([r.reward_mean for r in records])) if records else None,
        "aoi_user_means": [float(v) for v in np.mean(
            [r.aoi_user_means for r in records], axis=0)] if records else [],
        "energy_ap_means": [float(v) for v in np.mean(
            [r.energy_ap_means for r in records], axis=0)] if records else [],
        "interference_total": int(sum(r.interference_total for r in records)),
        "objective_f": objective_from_records(
            records, run.weights_aoi, run.weights_energy) if records else None,
    }
    summary.update(run.extra_summary)
    with open(os.path.join(out_dir, "summary.json"), "w", newline="\n") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")

    with open(os.path.join(out_dir, "config.echo"), "w", newline="\n") as fh:
        fh.write(run.config_text)

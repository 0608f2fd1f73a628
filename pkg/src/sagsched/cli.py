"""Command-line harness: simulate, train, evaluate, bound, validate, trace.

Exit codes: 0 ok, 1 usage, 2 configuration, 3 runtime divergence.
"""

import os
import sys
import time
from typing import Optional

import click
import numpy as np

from . import mappo, schedulers
from .errors import ConfigurationError, SchedulingError, TrainingDiverged
from .metrics import RunRecord, emit_metrics, make_run_id, objective_from_records
from .presets import preset_library
from .scenario import Scenario, ScenarioConfig, build_scenario, load_scenario, make_env

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONFIG = 2
EXIT_DIVERGED = 3

PRESET_NAMES = sorted(preset_library().keys())
ABLATIONS = {"delayed": "delayed", "instant": "instant", "no-aoi": "no-aoi"}
POLICY_CHOICES = sorted(schedulers.BASELINES) + ["mappo"]


def _make_policy(name, scenario, env, seed, checkpoint_dir):
    if name == "mappo":
        if not checkpoint_dir:
            raise click.UsageError("--policy mappo requires --checkpoint")
        actors, _, meta = mappo.load_policy_bundle(checkpoint_dir)
        mappo.check_bundle_compatible(env, meta)
        return mappo.GreedyActorPolicy(actors, mappo.coverage_masks(env))
    return schedulers.make_baseline(
        name, scenario.topology, scenario.n_channels, seed=seed,
        arrival_offset=scenario.config.arrival_offset)


def _resolve_config(scenario_path: Optional[str], preset: Optional[str]) -> ScenarioConfig:
    if (scenario_path is None) == (preset is None):
        raise click.UsageError("provide exactly one of --scenario or --preset")
    if scenario_path is not None:
        return load_scenario(scenario_path)
    return preset_library()[preset]


def _scenario_options(fn):
    fn = click.option("--scenario", "scenario_path", type=click.Path(exists=True),
                      default=None, help="Scenario YAML file.")(fn)
    fn = click.option("--preset", type=click.Choice(PRESET_NAMES), default=None,
                      help="Named preset scenario.")(fn)
    return fn


def _emit(run: RunRecord, out: str) -> str:
    run_dir = os.path.join(out, run.run_id)
    emit_metrics(run, run_dir)
    return run_dir


@click.group()
def cli():
    """Scheduling simulator and trainer for satellite/UAV/BS networks."""


@cli.command()
@_scenario_options
@click.option("--policy", type=click.Choice(POLICY_CHOICES),
              default="round-robin", show_default=True)
@click.option("--checkpoint", "checkpoint_dir", type=click.Path(exists=True),
              default=None, help="Checkpoint directory (for --policy mappo).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--episodes", type=int, default=100, show_default=True)
@click.option("--out", type=click.Path(), default="runs", show_default=True)
def simulate(scenario_path, preset, policy, checkpoint_dir, seed, episodes, out):
    """Roll out a fixed policy (baseline or trained greedy) and write metrics."""
    cfg = _resolve_config(scenario_path, preset)
    scn = build_scenario(cfg)
    env = make_env(scn)
    pol = _make_policy(policy, scn, env, seed, checkpoint_dir)
    started = time.monotonic()
    records = mappo.rollout(env, pol, episodes, scn.episode_len, seed=seed)
    run = RunRecord(
        run_id=make_run_id(cfg.config_hash(), f"simulate-{policy}", seed),
        config_hash=cfg.config_hash(), seed=seed,
        config_text=cfg.canonical_text(), command=f"simulate-{policy}",
        records=records, weights_aoi=scn.weights.aoi,
        weights_energy=scn.weights.energy,
        wall_clock_s=time.monotonic() - started)
    run_dir = _emit(run, out)
    f = objective_from_records(records, scn.weights.aoi, scn.weights.energy)
    click.echo(f"{policy}: episodes={episodes} objective_f={f:.6g} "
               f"interference={sum(r.interference_total for r in records)} "
               f"-> {run_dir}")


@cli.command()
@_scenario_options
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--episodes", type=int, default=None,
              help="Training episodes (default: scenario's train section or 300).")
@click.option("--ablation", type=click.Choice(sorted(ABLATIONS)), default="delayed",
              show_default=True, help="Observation rule for satellite/UAVs.")
@click.option("--out", type=click.Path(), default="runs", show_default=True)
@click.option("--progress", type=int, default=0, show_default=True,
              help="Print a progress line every N episodes (0 = silent).")
def train(scenario_path, preset, seed, episodes, ablation, out, progress):
    """Train the multi-agent PPO scheduler and checkpoint the result."""
    cfg = _resolve_config(scenario_path, preset)
    scn = build_scenario(cfg)
    train_kwargs = dict(cfg.train)
    if episodes is not None:
        train_kwargs["episodes"] = episodes
    train_kwargs["episode_len"] = scn.episode_len
    train_kwargs["seed"] = seed
    train_kwargs["observation_mode"] = ABLATIONS[ablation]
    tc = mappo.TrainConfig(**train_kwargs)
    env = make_env(scn, observation_mode=tc.observation_mode)
    started = time.monotonic()
    result = mappo.train(env, tc, progress_every=progress)
    elapsed = time.monotonic() - started
    command = f"train-{ablation}"
    run = RunRecord(
        run_id=make_run_id(cfg.config_hash(), command, seed),
        config_hash=cfg.config_hash(), seed=seed,
        config_text=cfg.canonical_text(), command=command,
        records=result.records, weights_aoi=scn.weights.aoi,
        weights_energy=scn.weights.energy,
        extra_summary={"ablation": ablation, "train_episodes": tc.episodes},
        wall_clock_s=elapsed)
    run_dir = _emit(run, out)
    ckpt_dir = os.path.join(run_dir, "checkpoint")
    mappo.save_policy_bundle(ckpt_dir, result.instances, {
        "config_hash": cfg.config_hash(), "seed": seed, "ablation": ablation,
        "episodes_trained": tc.episodes, "observation_mode": tc.observation_mode,
    })
    last = result.records[-1]
    click.echo(f"trained {tc.episodes} episodes in {elapsed:.1f}s; "
               f"final reward={last.reward_mean:.4g} "
               f"interference={last.interference_total} -> {run_dir}")


@cli.command()
@_scenario_options
@click.option("--checkpoint", "checkpoint_dir", type=click.Path(exists=True),
              required=True, help="Checkpoint directory from `train`.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--episodes", type=int, default=10, show_default=True)
@click.option("--ablation", type=click.Choice(sorted(ABLATIONS)), default="delayed",
              show_default=True)
@click.option("--out", type=click.Path(), default="runs", show_default=True)
def evaluate(scenario_path, preset, checkpoint_dir, seed, episodes, ablation, out):
    """Greedy benchmark run of a trained checkpoint (no critic, no updates)."""
    cfg = _resolve_config(scenario_path, preset)
    scn = build_scenario(cfg)
    env = make_env(scn, observation_mode=ABLATIONS[ablation])
    actors, _, meta = mappo.load_policy_bundle(checkpoint_dir)
    mappo.check_bundle_compatible(env, meta)
    masks = mappo.coverage_masks(env)
    started = time.monotonic()
    result = mappo.evaluate(env, actors, masks, episodes, scn.episode_len)
    command = f"evaluate-{ablation}"
    run = RunRecord(
        run_id=make_run_id(cfg.config_hash(), command, seed),
        config_hash=cfg.config_hash(), seed=seed,
        config_text=cfg.canonical_text(), command=command,
        records=result.records, weights_aoi=scn.weights.aoi,
        weights_energy=scn.weights.energy,
        extra_summary={"checkpoint": os.path.basename(os.path.normpath(checkpoint_dir))},
        wall_clock_s=time.monotonic() - started)
    run_dir = _emit(run, out)
    click.echo(f"objective_f={result.objective:.6g} "
               f"aoi_per_user={[round(v, 4) for v in result.aoi_user_means]} "
               f"interference={result.interference_total} -> {run_dir}")


@cli.command()
@_scenario_options
@click.option("--horizon", type=int, default=None,
              help="Averaging horizon in frames (default: episode length).")
@click.option("--out", type=click.Path(), default=None)
def bound(scenario_path, preset, horizon, out):
    """Print the reference lower bound on total average age."""
    cfg = _resolve_config(scenario_path, preset)
    scn = build_scenario(cfg)
    horizon = horizon or scn.episode_len
    per_user, total = schedulers.aoi_lower_bound(scn.topology, scn.n_channels,
                                                 horizon)
    for j, v in enumerate(per_user, start=1):
        click.echo(f"user {j}: {v:.6g}")
    click.echo(f"total: {total:.6g}")
    if out:
        import json
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, "bound.json"), "w") as fh:
            json.dump({"per_user": [float(v) for v in per_user],
                       "total": total, "horizon": horizon,
                       "config_hash": cfg.config_hash()}, fh, indent=2,
                      sort_keys=True)
            fh.write("\n")


@cli.command()
@_scenario_options
def validate(scenario_path, preset):
    """Lint a scenario: build everything and report the derived structure."""
    cfg = _resolve_config(scenario_path, preset)
    scn = build_scenario(cfg)
    topo = scn.topology
    click.echo(f"scenario '{cfg.name}': {topo.n_aps} APs, {topo.n_users} users, "
               f"{scn.n_channels} channels, frame {cfg.frame_len_s * 1e3:g} ms")
    for k, ap in enumerate(topo.aps):
        covered = topo.covered_users(k)
        delays = sorted(set(int(d) for d in topo.delay[k, covered - 1]))
        click.echo(f"  ap {k} ({ap.kind.value}): covers {covered.size} users, "
                   f"delay frames {delays}")
    click.echo(f"config hash {cfg.config_hash()[:12]} ok")


@cli.command()
@_scenario_options
@click.option("--policy", type=click.Choice(POLICY_CHOICES),
              default="round-robin", show_default=True)
@click.option("--checkpoint", "checkpoint_dir", type=click.Path(exists=True),
              default=None, help="Checkpoint directory (for --policy mappo).")
@click.option("--frames", type=int, default=30, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), default=None,
              help="Write the trace to a file instead of stdout.")
def trace(scenario_path, preset, policy, checkpoint_dir, frames, seed, out):
    """Dump a per-frame ledger log (frame k u p v d) for trace-diffing."""
    cfg = _resolve_config(scenario_path, preset)
    scn = build_scenario(cfg)
    env = make_env(scn)
    pol = _make_policy(policy, scn, env, seed, checkpoint_dir)
    env.reset(seed=seed)
    pol.start_episode()
    lines = []
    for _ in range(frames):
        joint = pol.plan(env)
        outcome = env.step(joint)
        lines.append(f"# frame {outcome.stats.frame} arrivals="
                     f"{sum(len(a) for a in outcome.report.cells.values())} "
                     f"collisions={outcome.report.interference_count}")
        lines.extend(env.ledger.debug_lines())
    text = "\n".join(lines) + "\n"
    if out:
        os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
        with open(out, "w") as fh:
            fh.write(text)
        click.echo(f"wrote {out}")
    else:
        click.echo(text, nl=False)


def cli_main(args) -> int:
    """Invoke the CLI programmatically; returns the exit status."""
    try:
        cli.main(args=list(args), standalone_mode=False)
        return EXIT_OK
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.UsageError as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        if exc.ctx is not None:
            click.echo(exc.ctx.get_usage(), err=True)
        return EXIT_USAGE
    except click.Abort:
        return EXIT_USAGE
    except (ConfigurationError, SchedulingError) as exc:
        click.echo(f"configuration error: {exc}", err=True)
        return EXIT_CONFIG
    except TrainingDiverged as exc:
        click.echo(f"training diverged: {exc}", err=True)
        return EXIT_DIVERGED


def main() -> None:
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()

"""Experiment driver: seeded runs, metrics persistence, sweeps, benchmarks.

Metrics are line-delimited JSON records flushed per episode, so a killed
run leaves a valid prefix. Wall-clock act latency goes to a sidecar timing
file, keeping the metrics files byte-reproducible for a fixed (config,
seed) pair. Moving averages live only in the plot export; the raw records
stay canonical.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import time
from pathlib import Path

import numpy as np

from . import baselines
from .config import (ConfigError, ExperimentConfig, dump_config,
                     replace_in_config)
from .sac import ReplayMemory, SacAgent, Transition, action_bounds, state_dim
from .trainer import Trainer, evaluate_policy, load_checkpoint

log = logging.getLogger("uavmec")

BENCH_TERMINAL_GRID = (2, 4, 8, 16, 32)


def _jl(obj) -> str:
    return json.dumps(obj, sort_keys=True) + "\n"


def _write_summary(path: Path, summary: dict) -> None:
    path.write_text(json.dumps(summary, sort_keys=True, indent=2))


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path | None = None,
                   seed_override: int | None = None,
                   resume: str | Path | None = None) -> dict:
    """Train per seed, writing metrics, checkpoints, and summaries."""
    if cfg.run.baseline is not None and cfg.run.hybrid == "none":
        raise ConfigError("run: training with a baseline requires hybrid "
                          "'alloc' or 'traj' (pure baselines are evaluate-only)")
    out = Path(out_dir if out_dir is not None else cfg.run.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(dump_config(cfg))
    seeds = (seed_override,) if seed_override is not None else cfg.run.seeds
    if resume is not None and len(seeds) != 1:
        raise ConfigError("resume applies to a single seed; pass --seed")

    seed_summaries = []
    for seed in seeds:
        seed_summaries.append(_run_seed(cfg, seed, out / f"seed_{seed}", resume))

    keys = ("objective_mean", "fairness_mean", "arrival_ratio", "return_mean", "bits_mean")
    cross = {"seeds": list(seeds), "per_seed": seed_summaries}
    finals = [s.get("final_eval") for s in seed_summaries if s.get("final_eval")]
    if finals:
        for k in keys:
            vals = [f[k] for f in finals]
            cross[k] = {"mean": float(np.mean(vals)), "std": float(np.std(vals))}
    _write_summary(out / "summary.json", cross)
    return cross


def _run_seed(cfg: ExperimentConfig, seed: int, seed_dir: Path,
              resume: str | Path | None) -> dict:
    seed_dir.mkdir(parents=True, exist_ok=True)
    episodes = cfg.run.episodes
    metrics_path = seed_dir / "metrics.jsonl"
    timing_path = seed_dir / "timing.jsonl"
    eval_path = seed_dir / "eval.jsonl"

    if resume is not None:
        trainer = load_checkpoint(resume, cfg)
        if trainer.seed != seed:
            raise ConfigError(f"checkpoint was trained with seed {trainer.seed}, "
                              f"cannot resume as seed {seed}")
        # drop any records past the checkpoint so the resumed stream appends
        # cleanly after a crash
        for path in (metrics_path, timing_path, eval_path):
            if path.exists():
                kept = [line for line in path.read_text().splitlines()
                        if line and json.loads(line)["episode"] <= trainer.episode]
                path.write_text("".join(x + "\n" for x in kept))
        file_mode = "a"
        log.info("seed %d: resuming at episode %d", seed, trainer.episode)
    else:
        trainer = Trainer(cfg, seed)
        file_mode = "w"

    t_start = time.perf_counter()
    with open(metrics_path, file_mode) as mfh, \
            open(timing_path, file_mode) as tfh, \
            open(eval_path, file_mode) as efh:

        def on_episode(rec: dict) -> None:
            latency = rec.pop("act_latency")
            mfh.write(_jl(rec))
            mfh.flush()
            tfh.write(_jl({"episode": rec["episode"], "act_latency": latency}))
            tfh.flush()
            interval = cfg.run.checkpoint_interval
            if interval and rec["episode"] % interval == 0:
                trainer.save_checkpoint(seed_dir / f"ckpt_ep{rec['episode']}.bin")

        def on_eval(summary: dict) -> None:
            efh.write(_jl({"episode": trainer.episode, **summary}))
            efh.flush()

        records = trainer.run(episodes, on_episode=on_episode, on_eval=on_eval)

        final_eval = None
        if episodes > 0:
            final_eval, _ = trainer.evaluate(cfg.run.eval_episodes)
            efh.write(_jl({"episode": trainer.episode, **final_eval}))
            trainer.save_checkpoint(seed_dir / "ckpt_final.bin")

    export_plot_table(seed_dir)
    tail = records[-100:]
    summary = {
        "seed": seed,
        "episodes": trainer.episode,
        "updates": trainer.updates,
        "wall_time_s": time.perf_counter() - t_start,
        "final_eval": final_eval,
    }
    if tail:
        summary["train_tail"] = {
            "objective_mean": float(np.mean([r["objective"] for r in tail])),
            "fairness_mean": float(np.mean([r["fairness"] for r in tail])),
            "arrival_ratio": float(np.mean([r["arrived"] for r in tail])),
            "return_mean": float(np.mean([r["return"] for r in tail])),
        }
    _write_summary(seed_dir / "summary.json", summary)
    log.info("seed %d: done after %d episodes", seed, trainer.episode)
    return summary


def export_plot_table(seed_dir: str | Path, window: int = 100) -> Path:
    """Flatten metrics.jsonl to a CSV with moving averages for plotting."""
    seed_dir = Path(seed_dir)
    records = [json.loads(line) for line in
               (seed_dir / "metrics.jsonl").read_text().splitlines() if line]
    out_path = seed_dir / "plot.csv"
    cols = ["episode", "return", "bits", "fairness", "objective", "arrived",
            "final_distance", f"return_ma{window}", f"objective_ma{window}",
            f"arrival_ratio_{window}"]
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        ret_w, obj_w, arr_w = [], [], []
        for rec in records:
            ret_w.append(rec["return"])
            obj_w.append(rec["objective"])
            arr_w.append(1.0 if rec["arrived"] else 0.0)
            for w in (ret_w, obj_w, arr_w):
                if len(w) > window:
                    w.pop(0)
            writer.writerow([rec["episode"], rec["return"], rec["bits"],
                             rec["fairness"], rec["objective"], int(rec["arrived"]),
                             rec["final_distance"], sum(ret_w) / len(ret_w),
                             sum(obj_w) / len(obj_w), sum(arr_w) / len(arr_w)])
    return out_path


# ---------------------------------------------------------------------------
# evaluation of checkpoints and pure baselines

def baseline_policy(kind: str, world):
    """Full act-per-slot policy for a baseline, random-filling missing halves."""
    if kind == "random":
        return lambda s, svec, rng: baselines.random_act(s, world, rng)
    traj_fn, alloc_fn = baselines.baseline_half(kind)

    def policy(s, svec, rng):
        traj = traj_fn(s, world) if traj_fn is not None else None
        alloc = alloc_fn(s, world) if alloc_fn is not None else None
        return baselines.compose_action(world, traj=traj, alloc=alloc, rng=rng)

    return policy


def evaluate(cfg: ExperimentConfig, checkpoint: str | Path | None = None,
             baseline: str | None = None, episodes: int | None = None,
             out_dir: str | Path | None = None, seed: int | None = None) -> dict:
    """Deterministic rollouts of a checkpoint or a pure baseline policy.

    Emits per-slot trajectory traces and an aggregate summary.
    """
    episodes = episodes if episodes is not None else cfg.run.eval_episodes
    if (checkpoint is None) == (baseline is None):
        raise ConfigError("evaluate needs exactly one of checkpoint or baseline")
    if checkpoint is not None:
        trainer = load_checkpoint(checkpoint, cfg)
        summary, traces = trainer.evaluate(episodes, collect_traces=True)
        label = f"checkpoint:{checkpoint}"
    else:
        from .config import BASELINE_KINDS
        if baseline not in BASELINE_KINDS:
            raise ConfigError(f"unknown baseline '{baseline}'")
        policy = baseline_policy(baseline, cfg.world)
        summary, traces = evaluate_policy(cfg, seed if seed is not None else cfg.run.seeds[0],
                                          episodes, policy, collect_traces=True)
        label = f"baseline:{baseline}"
    summary = {"policy": label, **summary}
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(dump_config(cfg))
        with open(out / "trace.jsonl", "w") as fh:
            for row in traces:
                fh.write(_jl(row))
        _write_summary(out / "eval_summary.json", summary)
    return summary


# ---------------------------------------------------------------------------
# latency benchmark

def bench_latency(cfg: ExperimentConfig, repetitions: int = 100) -> dict:
    """Mean single-action and single-update latency over a terminal-count grid.

    Absolute numbers are hardware-specific; the report is a methodology
    artifact, not a reference value.
    """
    if repetitions < 1:
        raise ConfigError("bench: repetitions must be >= 1")
    rows = []
    for m in BENCH_TERMINAL_GRID:
        world = dataclasses.replace(cfg.world, M=m, e_init=float(cfg.world.e_init[0]))
        lo, hi = action_bounds(world, "full")
        rng = np.random.default_rng(17)
        agent = SacAgent(state_dim(world), lo, hi, cfg.agent, rng)
        memory = ReplayMemory(max(cfg.agent.batch_size * 4, 256),
                              state_dim(world), len(lo))
        for _ in range(memory.capacity):
            s = rng.uniform(0.0, 1.0, size=state_dim(world))
            s2 = rng.uniform(0.0, 1.0, size=state_dim(world))
            a = rng.uniform(lo, hi)
            memory.push(Transition(s, a, float(rng.normal()), s2, False))

        states = rng.uniform(0.0, 1.0, size=(repetitions, state_dim(world)))
        t0 = time.perf_counter()
        for i in range(repetitions):
            agent.act(states[i], rng)
        act_latency = (time.perf_counter() - t0) / repetitions

        t0 = time.perf_counter()
        for _ in range(repetitions):
            agent.update(memory.sample(cfg.agent.batch_size, rng), rng)
        update_latency = (time.perf_counter() - t0) / repetitions

        rows.append({"M": m, "act_latency_s": act_latency,
                     "update_latency_s": update_latency})
        log.info("bench M=%d act=%.3es update=%.3es", m, act_latency, update_latency)
    return {"repetitions": repetitions, "batch_size": cfg.agent.batch_size,
            "hidden": list(cfg.agent.hidden), "rows": rows}


# ---------------------------------------------------------------------------
# parameter sweeps

def sweep(cfg: ExperimentConfig, param: str, values: list,
          out_dir: str | Path | None = None) -> list[dict]:
    """Run the full experiment once per parameter value; one summary row each."""
    out = Path(out_dir if out_dir is not None else cfg.run.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for value in values:
        cfg_v = replace_in_config(cfg, param, value)
        sub = out / f"{param.replace('.', '_')}={value}"
        summary = run_experiment(cfg_v, out_dir=sub)
        row = {"param": param, "value": value}
        for k in ("objective_mean", "fairness_mean", "arrival_ratio", "bits_mean"):
            if k in summary:
                row[k] = summary[k]["mean"]
                row[f"{k}_std"] = summary[k]["std"]
        rows.append(row)
    with open(out / "sweep.json", "w") as fh:
        json.dump(rows, fh, sort_keys=True, indent=2)
    if rows:
        with open(out / "sweep.csv", "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)
    return rows

"""Training loop, deterministic evaluation, and exact-resume checkpoints.

One Trainer owns one seed's run. All randomness flows through named
streams spawned from the seed (episode initialization, per-terminal
mobility, policy sampling, replay sampling, network init), and a
checkpoint captures every stream position together with the networks,
optimizer moments, and the full replay ring, so a resumed run continues
bit-exactly. Evaluation episodes draw from their own streams keyed by
(seed, episode), leaving the training streams untouched.
"""

from __future__ import annotations

import dataclasses
import json
import math
import struct
import time
from pathlib import Path

import numpy as np

from . import baselines, mobility
from .config import ConfigError, ExperimentConfig, MobilityParams, resolved_dict
from .env import EnvState, is_arrived
from .neural import (load_adam, load_mlp, read_array, save_adam, save_mlp,
                     write_array)
from .reward import (FairnessAccumulator, arrival_reward, combined_reward,
                     computation_reward, fairness_index)
from .sac import ReplayMemory, SacAgent, Transition, action_bounds, encode_state, state_dim
from .sim import EpisodeSim

CKPT_MAGIC = b"UMECCKP1"
_EVAL_STREAM_TAG = 0x45564143


def _policy_streams(seed: int, m: int):
    env_ss, mob_ss, pol_ss, rep_ss, init_ss = np.random.SeedSequence(seed).spawn(5)
    return (np.random.default_rng(env_ss), mobility.spawn_rngs(mob_ss, m),
            np.random.default_rng(pol_ss), np.random.default_rng(rep_ss),
            np.random.default_rng(init_ss))


class Trainer:
    """Trains one agent on one seed: rollouts, replay, periodic updates."""

    def __init__(self, cfg: ExperimentConfig, seed: int):
        self.cfg = cfg
        self.seed = seed
        world = cfg.world
        env_rng, mob_rngs, self.policy_rng, self.replay_rng, init_rng = \
            _policy_streams(seed, world.M)
        self.sim = EpisodeSim(world, cfg.mobility, env_rng, mob_rngs)

        mode = cfg.run.hybrid
        lo, hi = action_bounds(world, "full" if mode == "none" else mode)
        self.agent = SacAgent(state_dim(world), lo, hi, cfg.agent, init_rng)
        self.memory = ReplayMemory(cfg.agent.memory_capacity, state_dim(world), len(lo))

        self._traj_fn = None
        self._alloc_fn = None
        if mode != "none":
            traj, alloc = baselines.baseline_half(cfg.run.baseline)
            self._traj_fn, self._alloc_fn = traj, alloc

        self.episode = 0
        self.total_slots = 0
        self.updates = 0

    # -- action plumbing ---------------------------------------------------

    def _full_from_agent(self, env_state: EnvState, raw_agent: np.ndarray) -> np.ndarray:
        mode = self.cfg.run.hybrid
        if mode == "none":
            return raw_agent
        world = self.cfg.world
        m = world.M
        if mode == "alloc":
            traj = self._traj_fn(env_state, world)
            alloc = (raw_agent[:m], raw_agent[m:2 * m], raw_agent[2 * m:])
        else:
            traj = (raw_agent[0], raw_agent[1])
            alloc = self._alloc_fn(env_state, world)
        return baselines.compose_action(world, traj=traj, alloc=alloc)

    def _mobility_at(self, episode: int) -> MobilityParams:
        params = self.cfg.mobility
        for ep, p in self.cfg.run.mobility_schedule:
            if episode >= ep:
                params = p
            else:
                break
        return params

    # -- training ------------------------------------------------------------

    def _run_episode(self) -> dict:
        cfg = self.cfg
        world = cfg.world
        acfg = cfg.agent
        self.sim.set_mobility_params(self._mobility_at(self.episode))
        s = self.sim.reset()
        acc = FairnessAccumulator.create(world.M)
        ep_return = 0.0
        act_time = 0.0
        for n in range(1, world.N + 1):
            svec = encode_state(s, world)
            t0 = time.perf_counter()
            if self.total_slots < acfg.warmup_random_slots:
                raw_agent = self.policy_rng.uniform(self.agent.lo, self.agent.hi)
            else:
                raw_agent = self.agent.act(svec, self.policy_rng)
            act_time += time.perf_counter() - t0

            outcome, _ = self.sim.step(self._full_from_agent(s, raw_agent))
            acc.add(outcome.bits)
            comp = computation_reward(outcome.bits, acc, cfg.reward)
            arr = None
            if n == world.N:
                arr = arrival_reward(outcome.next_state.q_u, cfg.reward, world)
            r = combined_reward(n, world.N, comp, arr, cfg.reward)
            ep_return += r
            s2 = outcome.next_state
            self.memory.push(Transition(svec, raw_agent, r, encode_state(s2, world),
                                        n == world.N))
            self.total_slots += 1
            if (acfg.grad_steps_per_update > 0
                    and self.total_slots >= acfg.warmup_random_slots
                    and self.total_slots % acfg.update_interval_slots == 0
                    and len(self.memory) >= acfg.batch_size):
                for _ in range(acfg.grad_steps_per_update):
                    batch = self.memory.sample(acfg.batch_size, self.replay_rng)
                    self.agent.update(batch, self.replay_rng)
                    self.updates += 1
            s = s2

        bits = float(acc.cum_bits.sum())
        fair = fairness_index(acc.cum_bits)
        dist = math.hypot(s.q_u[0] - world.q_D[0], s.q_u[1] - world.q_D[1])
        return {
            "episode": self.episode,
            "return": ep_return,
            "bits": bits,
            "fairness": fair,
            "objective": fair ** cfg.reward.omega * bits,
            "arrived": is_arrived(s, world),
            "final_distance": dist,
            "act_latency": act_time / world.N,
        }

    def run(self, episodes: int, on_episode=None, on_eval=None) -> list[dict]:
        """Train until the given episode count; returns per-episode records."""
        records = []
        run_cfg = self.cfg.run
        while self.episode < episodes:
            self.episode += 1
            rec = self._run_episode()
            records.append(rec)
            if on_episode is not None:
                on_episode(rec)
            if (run_cfg.eval_interval and on_eval is not None
                    and self.episode % run_cfg.eval_interval == 0):
                summary, _ = self.evaluate(run_cfg.eval_episodes)
                on_eval(summary)
        return records

    # -- evaluation --------------------------------------------------------

    def evaluate(self, episodes: int, collect_traces: bool = False, tag: int | None = None):
        """Deterministic-policy rollouts on a dedicated evaluation stream."""
        def policy(env_state, svec, rng):
            raw = self.agent.act(svec, rng, deterministic=True)
            return self._full_from_agent(env_state, raw)

        return evaluate_policy(self.cfg, self.seed, episodes, policy,
                               mobility_params=self._mobility_at(max(self.episode, 1)),
                               tag=self.episode if tag is None else tag,
                               collect_traces=collect_traces)

    # -- checkpointing -------------------------------------------------------

    def save_checkpoint(self, path: str | Path) -> None:
        mem = self.memory
        manifest = {
            "version": 1,
            "config": resolved_dict(self.cfg),
            "seed": self.seed,
            "episode": self.episode,
            "total_slots": self.total_slots,
            "updates": self.updates,
            "memory": {"cursor": mem.cursor, "size": mem.size},
            "rng": {
                "env_init": self.sim.env_init_rng.bit_generator.state,
                "mobility": [g.bit_generator.state for g in self.sim.mobility_rngs],
                "policy": self.policy_rng.bit_generator.state,
                "replay": self.replay_rng.bit_generator.state,
            },
        }
        header = json.dumps(manifest, sort_keys=True).encode()
        with open(path, "wb") as fh:
            fh.write(CKPT_MAGIC)
            fh.write(struct.pack("<I", len(header)))
            fh.write(header)
            a = self.agent
            for net in (a.policy, a.q1, a.q2, a.q1_target, a.q2_target):
                save_mlp(fh, net)
            for opt in (a.opt_policy, a.opt_q1, a.opt_q2):
                save_adam(fh, opt)
            n = mem.size
            for arr in (mem._s[:n], mem._a[:n], mem._r[:n], mem._s2[:n], mem._done[:n]):
                write_array(fh, arr)


def read_manifest(path: str | Path) -> dict:
    with open(path, "rb") as fh:
        if fh.read(len(CKPT_MAGIC)) != CKPT_MAGIC:
            raise ValueError(f"{path} is not an agent checkpoint")
        n = struct.unpack("<I", fh.read(4))[0]
        return json.loads(fh.read(n))


def check_manifest(manifest: dict, cfg: ExperimentConfig) -> None:
    """Refuse checkpoints built under a different world/model configuration.

    The run block (episode counts, output paths) may differ; the physics,
    mobility, reward, and agent blocks must match exactly.
    """
    # canonicalize through JSON so tuple/list representation cannot differ
    current = json.loads(json.dumps(resolved_dict(cfg)))
    stored = manifest["config"]
    for block in ("world", "mobility", "reward", "agent"):
        if stored.get(block) != current[block]:
            raise ConfigError(f"checkpoint config block '{block}' does not match "
                              "the current config")


def load_checkpoint(path: str | Path, cfg: ExperimentConfig) -> Trainer:
    """Rebuild a Trainer that continues bit-exactly from a saved state."""
    with open(path, "rb") as fh:
        if fh.read(len(CKPT_MAGIC)) != CKPT_MAGIC:
            raise ValueError(f"{path} is not an agent checkpoint")
        n = struct.unpack("<I", fh.read(4))[0]
        manifest = json.loads(fh.read(n))
        check_manifest(manifest, cfg)
        # the action-space mode is baked into the stored networks; adopt it
        stored_run = manifest["config"]["run"]
        cfg = dataclasses.replace(
            cfg, run=dataclasses.replace(cfg.run, hybrid=stored_run["hybrid"],
                                         baseline=stored_run["baseline"]))
        trainer = Trainer(cfg, manifest["seed"])
        a = trainer.agent
        a.policy = load_mlp(fh)
        a.q1 = load_mlp(fh)
        a.q2 = load_mlp(fh)
        a.q1_target = load_mlp(fh)
        a.q2_target = load_mlp(fh)
        a.opt_policy = load_adam(fh, a.policy)
        a.opt_q1 = load_adam(fh, a.q1)
        a.opt_q2 = load_adam(fh, a.q2)
        mem = trainer.memory
        size = manifest["memory"]["size"]
        mem._s[:size] = read_array(fh)
        mem._a[:size] = read_array(fh)
        mem._r[:size] = read_array(fh)
        mem._s2[:size] = read_array(fh)
        mem._done[:size] = read_array(fh)
        mem.size = size
        mem.cursor = manifest["memory"]["cursor"]

    trainer.episode = manifest["episode"]
    trainer.total_slots = manifest["total_slots"]
    trainer.updates = manifest["updates"]
    rng = manifest["rng"]
    trainer.sim.env_init_rng.bit_generator.state = rng["env_init"]
    for gen, st in zip(trainer.sim.mobility_rngs, rng["mobility"]):
        gen.bit_generator.state = st
    trainer.policy_rng.bit_generator.state = rng["policy"]
    trainer.replay_rng.bit_generator.state = rng["replay"]
    return trainer


def evaluate_policy(cfg: ExperimentConfig, seed: int, episodes: int, policy_fn,
                    mobility_params: MobilityParams | None = None, tag: int = 0,
                    collect_traces: bool = False):
    """Score any act-per-slot policy on dedicated evaluation streams.

    ``policy_fn(env_state, state_vec, rng)`` must return a raw full action
    vector. Returns (summary dict, trace rows or None).
    """
    world = cfg.world
    params = mobility_params if mobility_params is not None else cfg.mobility
    env_ss, mob_ss, pol_ss = np.random.SeedSequence(
        [seed, _EVAL_STREAM_TAG, tag]).spawn(3)
    sim = EpisodeSim(world, params, np.random.default_rng(env_ss),
                     mobility.spawn_rngs(mob_ss, world.M))
    rng = np.random.default_rng(pol_ss)

    returns, objectives, fairs, bits_all, dists, arrivals = [], [], [], [], [], []
    traces = [] if collect_traces else None
    for ep in range(1, episodes + 1):
        s = sim.reset()
        acc = FairnessAccumulator.create(world.M)
        ep_return = 0.0
        for n in range(1, world.N + 1):
            svec = encode_state(s, world)
            raw = policy_fn(s, svec, rng)
            outcome, executed = sim.step(raw)
            acc.add(outcome.bits)
            comp = computation_reward(outcome.bits, acc, cfg.reward)
            arr = None
            if n == world.N:
                arr = arrival_reward(outcome.next_state.q_u, cfg.reward, world)
            ep_return += combined_reward(n, world.N, comp, arr, cfg.reward)
            if collect_traces:
                d = np.hypot(s.q[:, 0] - s.q_u[0], s.q[:, 1] - s.q_u[1])
                traces.append({
                    "episode": ep, "slot": n,
                    "uav": [float(x) for x in s.q_u],
                    "terminals": [[float(x) for x in q] for q in s.q],
                    "p": list(executed.p), "f": list(executed.f), "t": list(executed.t),
                    "dist": list(d), "bits": list(outcome.bits),
                })
            s = outcome.next_state
        fair = fairness_index(acc.cum_bits)
        total_bits = float(acc.cum_bits.sum())
        returns.append(ep_return)
        fairs.append(fair)
        bits_all.append(total_bits)
        objectives.append(fair ** cfg.reward.omega * total_bits)
        dists.append(math.hypot(s.q_u[0] - world.q_D[0], s.q_u[1] - world.q_D[1]))
        arrivals.append(is_arrived(s, world))

    summary = {
        "episodes": episodes,
        "return_mean": float(np.mean(returns)),
        "objective_mean": float(np.mean(objectives)),
        "fairness_mean": float(np.mean(fairs)),
        "bits_mean": float(np.mean(bits_all)),
        "arrival_ratio": float(np.mean(arrivals)),
        "final_distance_mean": float(np.mean(dists)),
    }
    return summary, traces

"""Benchmark policies sharing the learned agent's act-per-slot interface.

Trajectory-only baselines (hover-follow-hover, straight line) and
allocation-only baselines (greedy local, greedy offload) each fill half of
the action vector; the harness composes the other half from a trained
agent (hybrid mode) or from uniform draws. The random baseline is a
complete policy on its own. All of them run through the same repair,
energy-rule, and stepping path as the learner.
"""

from __future__ import annotations

import math

import numpy as np

from .config import WorldConfig
from .env import EnvState

# fractional headroom so a budget-exhausting allocation never trips the
# energy rule through cube/cube-root rounding
_BUDGET_MARGIN = 1e-13


def _bearing(src: np.ndarray, dst: np.ndarray) -> float:
    ang = math.atan2(dst[1] - src[1], dst[0] - src[0])
    return ang % (2.0 * math.pi)


def hfh_reserve_slots(state: EnvState, cfg: WorldConfig) -> int:
    """Slots needed to reach the destination at full speed from here."""
    dist = math.hypot(state.q_u[0] - cfg.q_D[0], state.q_u[1] - cfg.q_D[1])
    return int(math.ceil(dist / (cfg.v_max * cfg.slot_dt)))


def hfh_follow_index(n: int, reserve: int, n_slots: int, m: int) -> int | None:
    """Which terminal the hover-follow-hover schedule serves in slot n.

    Non-reserved slots split into equal spans in terminal index order, any
    remainder staying on the last terminal. Returns None once the remaining
    slots are needed to reach the destination.
    """
    remaining = n_slots - n + 1
    if remaining <= reserve:
        return None
    span = max(1, (n_slots - reserve) // m)
    return min((n - 1) // span, m - 1)


def hfh_act(state: EnvState, cfg: WorldConfig) -> tuple[float, float]:
    """Trajectory half of the hover-follow-hover baseline.

    Follows each terminal in turn (matching its displacement exactly while
    above it), transits at full speed, and heads for the destination as
    soon as the recomputed reserve consumes the remaining slots.
    """
    reserve = hfh_reserve_slots(state, cfg)
    idx = hfh_follow_index(state.n, reserve, cfg.N, cfg.M)
    target = np.asarray(cfg.q_D, dtype=float) if idx is None else state.q[idx]
    dist = math.hypot(target[0] - state.q_u[0], target[1] - state.q_u[1])
    if dist == 0.0:
        return 0.0, 0.0
    v = min(dist / cfg.slot_dt, cfg.v_max)
    return v, _bearing(state.q_u, target)


def straight_act(state: EnvState, cfg: WorldConfig) -> tuple[float, float]:
    """Constant-speed straight flight from start to destination."""
    dist = math.hypot(cfg.q_D[0] - cfg.q_S[0], cfg.q_D[1] - cfg.q_S[1])
    speed = dist / cfg.T
    if speed > cfg.v_max:
        raise ValueError(f"straight trajectory needs speed {speed:.3f} > v_max")
    return speed, _bearing(np.asarray(cfg.q_S), np.asarray(cfg.q_D))


def greedy_local_alloc(state: EnvState, cfg: WorldConfig):
    """Burn the whole battery on local computation each slot (no offloading)."""
    raw = np.cbrt(state.e * cfg.N / (cfg.T * cfg.zeta_c))
    f = np.minimum(cfg.f_max, raw * (1.0 - _BUDGET_MARGIN))
    zeros = np.zeros(cfg.M)
    return zeros, f, zeros.copy()


def greedy_offload_alloc(state: EnvState, cfg: WorldConfig):
    """Burn the whole battery on offloading with equal time shares."""
    t = np.full(cfg.M, 1.0 / cfg.M)
    raw = state.e * cfg.N / (cfg.T * t)
    p = np.minimum(cfg.p_max, raw * (1.0 - _BUDGET_MARGIN))
    return p, np.zeros(cfg.M), t


def random_act(state: EnvState, cfg: WorldConfig, rng: np.random.Generator) -> np.ndarray:
    """Full action with every component uniform over its bound interval."""
    m = cfg.M
    hi = np.concatenate(([cfg.v_max, 2.0 * math.pi], np.full(m, cfg.p_max),
                         np.full(m, cfg.f_max), np.ones(m)))
    return rng.uniform(0.0, 1.0, size=3 * m + 2) * hi


def compose_action(cfg: WorldConfig, traj=None, alloc=None,
                   rng: np.random.Generator | None = None) -> np.ndarray:
    """Assemble a full raw action from trajectory and allocation halves.

    A missing half is drawn uniformly over its bounds (requires rng).
    """
    m = cfg.M
    vec = np.zeros(3 * m + 2)
    if traj is None:
        if rng is None:
            raise ValueError("missing trajectory half and no rng to fill it")
        vec[0] = rng.uniform(0.0, cfg.v_max)
        vec[1] = rng.uniform(0.0, 2.0 * math.pi)
    else:
        vec[0], vec[1] = traj
    if alloc is None:
        if rng is None:
            raise ValueError("missing allocation half and no rng to fill it")
        vec[2:2 + m] = rng.uniform(0.0, cfg.p_max, size=m)
        vec[2 + m:2 + 2 * m] = rng.uniform(0.0, cfg.f_max, size=m)
        vec[2 + 2 * m:] = rng.uniform(0.0, 1.0, size=m)
    else:
        p, f, t = alloc
        vec[2:2 + m] = p
        vec[2 + m:2 + 2 * m] = f
        vec[2 + 2 * m:] = t
    return vec


def baseline_half(kind: str):
    """(provides_traj, provides_alloc) act functions for a baseline kind."""
    if kind == "hfh":
        return hfh_act, None
    if kind == "straight":
        return straight_act, None
    if kind == "greedy_local":
        return None, greedy_local_alloc
    if kind == "greedy_offload":
        return None, greedy_offload_alloc
    raise ValueError(f"baseline '{kind}' does not provide a fixed half")

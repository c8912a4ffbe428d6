"""Fairness index and the heterogeneous per-slot / end-of-flight reward."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import RewardParams, WorldConfig


@dataclass
class FairnessAccumulator:
    """Running per-terminal totals of computation bits over an episode."""

    cum_bits: np.ndarray

    @classmethod
    def create(cls, m: int) -> "FairnessAccumulator":
        return cls(np.zeros(m))

    def add(self, slot_bits: np.ndarray) -> None:
        self.cum_bits += slot_bits


def fairness_index(totals: np.ndarray) -> float:
    """Jain's index (sum)^2 / (M * sum of squares), in [1/M, 1].

    All-zero totals are defined as perfectly fair (index 1); any finite
    choice would do since the paired bit sum is zero, but it must be
    explicit to avoid 0/0 in the first slot.
    """
    totals = np.asarray(totals, dtype=float)
    sq = float(totals @ totals)
    if sq == 0.0:
        return 1.0
    s = float(totals.sum())
    return s * s / (len(totals) * sq)


def computation_reward(slot_bits: np.ndarray, acc: FairnessAccumulator,
                       params: RewardParams) -> float:
    """Fairness-weighted bit increment for one slot.

    The accumulator must already include this slot's bits: the running
    fairness index for slot n sums through slot n inclusive.
    """
    i_n = fairness_index(acc.cum_bits)
    return i_n ** params.omega * float(np.asarray(slot_bits).sum())


def arrival_reward(final_uav: np.ndarray, params: RewardParams,
                   cfg: WorldConfig) -> float:
    """End-of-flight reward for reaching (or approaching) the destination.

    Progress mode pays A1 minus A2 per meter of final miss distance, so
    failed episodes still carry a gradient toward the destination. Sparse
    mode pays A1 only inside the destination radius.
    """
    dist = math.hypot(final_uav[0] - cfg.q_D[0], final_uav[1] - cfg.q_D[1])
    if params.sparse_mode:
        return params.A1 if dist <= cfg.dest_radius else 0.0
    return params.A1 - params.A2 * dist


def combined_reward(slot_idx: int, n_slots: int, comp_r: float,
                    arr_r: float | None, params: RewardParams) -> float:
    """Scaled computation reward, plus the arrival term on the final slot only."""
    if slot_idx < n_slots:
        if arr_r is not None:
            raise ValueError("arrival reward is only paid on the final slot")
        return params.A3 * comp_r
    if arr_r is None:
        raise ValueError("final slot requires the arrival reward component")
    return params.A3 * comp_r + arr_r

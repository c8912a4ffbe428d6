"""Gauss-Markov terminal motion with specular reflection at the field edges.

Speed and direction follow a first-order recursion blending memory, a mean
value, and Gaussian noise. Each terminal draws from its own generator, so
draw streams never depend on terminal order. The direction state itself is
left unwrapped (the recursion is linear); angles only pass through cos/sin
when converted to displacements.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import MobilityParams, WorldConfig


@dataclass
class MobilityState:
    """Current per-terminal speed and direction."""

    v: np.ndarray       # speeds, m/s, shape (M,)
    theta: np.ndarray   # directions, rad, shape (M,)


def init_state(params: MobilityParams) -> MobilityState:
    """Start each terminal at its mean speed and direction."""
    return MobilityState(np.array(params.v_bar, dtype=float),
                         np.array(params.theta_bar, dtype=float))


def _reflect_axis(x: np.ndarray, hi: float):
    """Fold positions into [0, hi]; returns folded values and bounce parity."""
    period = 2.0 * hi
    y = np.mod(x, period)
    over = y > hi
    folded = np.where(over, period - y, y)
    return folded, over


def gmrm_step(state: MobilityState, positions: np.ndarray, params: MobilityParams,
              rngs: list[np.random.Generator], cfg: WorldConfig):
    """One slot of Gauss-Markov motion.

    Returns the new mobility state and the per-terminal displacement vectors
    that keep every terminal inside the field (edges reflect both the path
    and the direction state). Negative sampled speeds clamp to zero.
    """
    m = len(rngs)
    phi = np.empty(m)
    psi = np.empty(m)
    for i in range(m):
        phi[i] = rngs[i].normal(params.phi_mean[i], params.phi_std[i])
        psi[i] = rngs[i].normal(params.psi_mean[i], params.psi_std[i])

    k1 = np.asarray(params.k1)
    k2 = np.asarray(params.k2)
    v = k1 * state.v + (1.0 - k1) * np.asarray(params.v_bar) + np.sqrt(1.0 - k1 ** 2) * phi
    v = np.maximum(v, 0.0)
    theta = (k2 * state.theta + (1.0 - k2) * np.asarray(params.theta_bar)
             + np.sqrt(1.0 - k2 ** 2) * psi)

    dt = cfg.slot_dt
    raw = positions + dt * v[:, None] * np.stack([np.cos(theta), np.sin(theta)], axis=1)

    w, h = cfg.field
    x, flip_x = _reflect_axis(raw[:, 0], w)
    y, flip_y = _reflect_axis(raw[:, 1], h)
    theta = np.where(flip_x, math.pi - theta, theta)
    theta = np.where(flip_y, -theta, theta)

    new_pos = np.stack([x, y], axis=1)
    displacements = new_pos - positions
    return MobilityState(v, theta), displacements


def spawn_rngs(seed_seq: np.random.SeedSequence, m: int) -> list[np.random.Generator]:
    """Independent per-terminal generators from one seed sequence."""
    return [np.random.default_rng(child) for child in seed_seq.spawn(m)]

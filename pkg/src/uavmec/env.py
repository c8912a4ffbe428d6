"""Physics and slot accounting of the wirelessly powered edge-compute network.

Every operation is a pure function of its arguments; the slot loop in
:mod:`uavmec.sim` wires them together with the mobility model. Channel
gain, bit counts, and energy flows for slot n are all evaluated at the
start-of-slot geometry, since positions barely move within one slot.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import WorldConfig


@dataclass
class EnvState:
    """World state at the start of a slot (slot index is 1-based)."""

    q_u: np.ndarray   # UAV horizontal position, shape (2,)
    q: np.ndarray     # terminal positions, shape (M, 2)
    e: np.ndarray     # battery energies, J, shape (M,)
    n: int            # slot index in 1..N+1


@dataclass
class Action:
    """One slot of control: UAV motion plus per-terminal resources."""

    v_u: float        # UAV speed, m/s
    theta_u: float    # UAV direction, rad
    p: np.ndarray     # transmit powers, W, shape (M,)
    f: np.ndarray     # CPU frequencies, cycles/s, shape (M,)
    t: np.ndarray     # offload-time proportions, shape (M,)

    @staticmethod
    def from_vector(vec: np.ndarray, m: int) -> "Action":
        """Unpack the flat (3M+2,) layout (v, theta, p_1..M, f_1..M, t_1..M)."""
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (3 * m + 2,):
            raise ValueError(f"action vector must have shape ({3 * m + 2},)")
        return Action(float(vec[0]), float(vec[1]),
                      vec[2:2 + m].copy(), vec[2 + m:2 + 2 * m].copy(),
                      vec[2 + 2 * m:].copy())

    def to_vector(self) -> np.ndarray:
        return np.concatenate(([self.v_u, self.theta_u], self.p, self.f, self.t))


@dataclass
class StepOutcome:
    """Result of advancing the network by one slot."""

    next_state: EnvState
    bits: np.ndarray        # computation bits per terminal this slot
    harvested: np.ndarray   # energy harvested per terminal, J
    consumed: np.ndarray    # energy consumed per terminal, J
    penalized: np.ndarray   # terminals whose p/f were zeroed by the energy rule


def channel_gain(q_u, q_m, cfg: WorldConfig):
    """Linear channel power gain of the air-to-ground link.

    Free-space loss at the 3D distance plus LoS/NLoS excess losses mixed by
    an elevation-angle-dependent LoS probability, all in dB, then converted
    to linear scale. Broadcasts over leading axes of ``q_m``.
    """
    q_u = np.asarray(q_u, dtype=float)
    q_m = np.asarray(q_m, dtype=float)
    diff = q_m - q_u
    d_h = np.hypot(diff[..., 0], diff[..., 1])
    ch = cfg.channel
    d3 = np.hypot(d_h, cfg.H)
    # arctan2 yields exactly pi/2 at zero horizontal distance
    elev_deg = np.degrees(np.arctan2(cfg.H, d_h))
    p_los = 1.0 / (1.0 + ch.h * np.exp(-ch.l * (elev_deg - ch.h)))
    loss_db = (20.0 * np.log10(4.0 * np.pi * ch.f_c * d3 / ch.c)
               + p_los * ch.eta_los + (1.0 - p_los) * ch.eta_nlos)
    gain = 10.0 ** (-loss_db / 10.0)
    return float(gain) if gain.ndim == 0 else gain


def offload_bits(t_share, p, gain, cfg: WorldConfig):
    """Raw bits offloaded in one slot given a time share and transmit power."""
    snr = np.asarray(p, dtype=float) * np.asarray(gain, dtype=float) / cfg.sigma2
    rate = cfg.B * np.log2(1.0 + snr)
    out = (cfg.T / (cfg.N * cfg.delta)) * np.asarray(t_share, dtype=float) * rate
    return float(out) if np.ndim(out) == 0 else out


def local_bits(f, cfg: WorldConfig):
    """Raw bits computed locally in one slot at CPU frequency f."""
    out = cfg.T * np.asarray(f, dtype=float) / (cfg.N * cfg.C)
    return float(out) if np.ndim(out) == 0 else out


def harvested_energy(gain, cfg: WorldConfig):
    """Energy a terminal harvests from the UAV broadcast in one slot."""
    out = cfg.eta0 * (cfg.T / cfg.N) * np.asarray(gain, dtype=float) * cfg.P_e
    return float(out) if np.ndim(out) == 0 else out


def slot_energy_spend(action: Action, cfg: WorldConfig) -> np.ndarray:
    """Per-terminal energy drawn from the battery in one slot."""
    return (cfg.T / cfg.N) * (cfg.zeta_c * action.f ** 3 + action.t * action.p)


def repair_offload_times(t_hat: np.ndarray) -> np.ndarray:
    """Scale offload-time shares down proportionally when they oversubscribe the slot."""
    t_hat = np.asarray(t_hat, dtype=float)
    total = t_hat.sum()
    if total <= 1.0:
        return t_hat.copy()
    return t_hat / total


def enforce_energy(state: EnvState, action: Action, cfg: WorldConfig):
    """Zero p and f of any terminal whose slot spend would exceed its battery.

    The zeroed terminal computes nothing this slot, which acts as the
    penalty for an infeasible action. The boundary is inclusive: a spend
    exactly equal to the battery is allowed.
    """
    spend = slot_energy_spend(action, cfg)
    flags = spend > state.e
    if not flags.any():
        return action, flags
    p = np.where(flags, 0.0, action.p)
    f = np.where(flags, 0.0, action.f)
    return Action(action.v_u, action.theta_u, p, f, action.t.copy()), flags


def _clamp_to_field(pts: np.ndarray, cfg: WorldConfig) -> np.ndarray:
    w, h = cfg.field
    out = np.array(pts, dtype=float)
    out[..., 0] = np.clip(out[..., 0], 0.0, w)
    out[..., 1] = np.clip(out[..., 1], 0.0, h)
    return out


def step(state: EnvState, action: Action, terminal_moves: np.ndarray,
         cfg: WorldConfig, penalized: np.ndarray | None = None) -> StepOutcome:
    """Advance the network by one slot.

    The action must already be repaired and energy-enforced; batteries then
    stay non-negative by construction. ``terminal_moves`` are the per-slot
    displacement vectors supplied by the mobility model.
    """
    if state.n > cfg.N:
        raise ValueError(f"episode over: slot {state.n} exceeds N={cfg.N}")
    gains = channel_gain(state.q_u, state.q, cfg)
    bits = local_bits(action.f, cfg) + offload_bits(action.t, action.p, gains, cfg)
    harvested = harvested_energy(gains, cfg)
    consumed = slot_energy_spend(action, cfg)

    dt = cfg.slot_dt
    uav_move = dt * action.v_u * np.array([np.cos(action.theta_u), np.sin(action.theta_u)])
    q_u_next = _clamp_to_field(state.q_u + uav_move, cfg)
    q_next = _clamp_to_field(state.q + terminal_moves, cfg)
    e_next = state.e - consumed + harvested

    next_state = EnvState(q_u_next, q_next, e_next, state.n + 1)
    if penalized is None:
        penalized = np.zeros(len(state.e), dtype=bool)
    return StepOutcome(next_state, np.asarray(bits, dtype=float), harvested,
                       consumed, penalized)


def is_arrived(state: EnvState, cfg: WorldConfig) -> bool:
    """Whether the UAV sits within the destination radius (boundary inclusive)."""
    return bool(np.hypot(state.q_u[0] - cfg.q_D[0], state.q_u[1] - cfg.q_D[1])
                <= cfg.dest_radius)

"""Episode simulator binding the network physics to the mobility model.

Owns the slot loop bookkeeping: action repair, the per-slot energy rule,
terminal motion, and the state hand-off. Reward computation stays with the
caller so training and scoring share one environment path.
"""

from __future__ import annotations

import numpy as np

from . import env, mobility
from .config import MobilityParams, WorldConfig
from .env import Action, EnvState, StepOutcome


class EpisodeSim:
    """Seedable episodic rollout of the network."""

    def __init__(self, world: WorldConfig, params: MobilityParams,
                 env_init_rng: np.random.Generator,
                 mobility_rngs: list[np.random.Generator]):
        self.world = world
        self.params = params
        self.env_init_rng = env_init_rng
        self.mobility_rngs = mobility_rngs
        self.state: EnvState | None = None
        self.mob_state: mobility.MobilityState | None = None

    def set_mobility_params(self, params: MobilityParams) -> None:
        self.params = params

    def reset(self) -> EnvState:
        w = self.world
        if self.params.initial_positions is not None:
            q = np.array(self.params.initial_positions, dtype=float)
        else:
            fw, fh = w.field
            q = self.env_init_rng.uniform(0.0, 1.0, size=(w.M, 2)) * np.array([fw, fh])
        self.state = EnvState(np.array(w.q_S, dtype=float), q,
                              np.array(w.e_init, dtype=float), 1)
        self.mob_state = mobility.init_state(self.params)
        return self.state

    def step(self, raw_action: np.ndarray) -> tuple[StepOutcome, Action]:
        """Repair, enforce, and execute one raw (3M+2,) action vector."""
        if self.state is None:
            raise RuntimeError("call reset() before step()")
        action = Action.from_vector(raw_action, self.world.M)
        action.t = env.repair_offload_times(action.t)
        action, flags = env.enforce_energy(self.state, action, self.world)
        self.mob_state, moves = mobility.gmrm_step(
            self.mob_state, self.state.q, self.params, self.mobility_rngs, self.world)
        outcome = env.step(self.state, action, moves, self.world, penalized=flags)
        self.state = outcome.next_state
        return outcome, action

"""Soft actor-critic learner: replay memory, twin critics with targets, and
the analytic gradients of the entropy-regularized losses.

The policy outputs the mean and log-std of a diagonal Gaussian that is
tanh-squashed onto the physical action bounds. Critics consume the state
concatenated with the action rescaled to [0, 1] per dimension, which keeps
network inputs well-scaled even though actions span many decades. Replay
stores the raw physical action exactly as the policy produced it; the
offload-time repair and the energy rule are environment semantics applied
on execution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import AgentConfig, WorldConfig
from .env import EnvState
from .neural import (AdamState, Mlp, adam_step, log1m_tanh_sq,
                     squashed_gaussian_sample, squashed_log_prob_from_noise,
                     squashed_mean_action)


def state_dim(cfg: WorldConfig) -> int:
    return 3 * cfg.M + 3


def encode_state(state: EnvState, cfg: WorldConfig) -> np.ndarray:
    """Flatten the world state into a roughly [0, 1]-scaled feature vector.

    Layout: UAV position, all terminal positions, all batteries, slot index;
    positions are scaled by the field size, energies by ``e_ref``, the slot
    by N. Length is 3M+3.
    """
    w, h = cfg.field
    scale = np.array([w, h])
    return np.concatenate([
        state.q_u / scale,
        (state.q / scale).ravel(),
        state.e / cfg.e_ref,
        [state.n / cfg.N],
    ])


def action_bounds(cfg: WorldConfig, mode: str = "full"):
    """Per-dimension [lo, hi] for the raw action vector.

    ``full`` covers (v, theta, p*M, f*M, t*M); ``alloc`` drops the two
    trajectory dimensions; ``traj`` keeps only them (hybrid baselines).
    """
    m = cfg.M
    hi_full = np.concatenate(([cfg.v_max, 2.0 * np.pi],
                              np.full(m, cfg.p_max), np.full(m, cfg.f_max),
                              np.ones(m)))
    if mode == "full":
        hi = hi_full
    elif mode == "alloc":
        hi = hi_full[2:]
    elif mode == "traj":
        hi = hi_full[:2]
    else:
        raise ValueError(f"unknown action mode '{mode}'")
    return np.zeros_like(hi), hi


@dataclass
class Transition:
    """One replay sample: (state, raw action, reward, next state, done)."""

    s: np.ndarray
    a: np.ndarray
    r: float
    s_next: np.ndarray
    done: bool


@dataclass
class Batch:
    s: np.ndarray
    a: np.ndarray
    r: np.ndarray
    s_next: np.ndarray
    done: np.ndarray


class ReplayMemory:
    """Fixed-capacity ring of transitions; overwrites the oldest when full."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int):
        self.capacity = capacity
        self._s = np.zeros((capacity, state_dim))
        self._a = np.zeros((capacity, action_dim))
        self._r = np.zeros(capacity)
        self._s2 = np.zeros((capacity, state_dim))
        self._done = np.zeros(capacity)
        self.cursor = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def push(self, tr: Transition) -> None:
        i = self.cursor
        self._s[i] = tr.s
        self._a[i] = tr.a
        self._r[i] = tr.r
        self._s2[i] = tr.s_next
        self._done[i] = 1.0 if tr.done else 0.0
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        if self.size == 0:
            raise ValueError("cannot sample from an empty memory")
        idx = rng.integers(0, self.size, size=batch_size)
        return Batch(self._s[idx], self._a[idx], self._r[idx],
                     self._s2[idx], self._done[idx])


class SacAgent:
    """Policy plus twin critics with exponentially averaged target copies."""

    def __init__(self, state_dim: int, lo: np.ndarray, hi: np.ndarray,
                 cfg: AgentConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        self.state_dim = state_dim
        self.action_dim = len(lo)
        policy_sizes = [state_dim, *cfg.hidden, 2 * self.action_dim]
        critic_sizes = [state_dim + self.action_dim, *cfg.hidden, 1]
        self.policy = Mlp.create(policy_sizes, rng)
        self.q1 = Mlp.create(critic_sizes, rng)
        self.q2 = Mlp.create(critic_sizes, rng)
        # targets start as exact copies of the critics
        self.q1_target = self.q1.clone()
        self.q2_target = self.q2.clone()
        self.opt_policy = AdamState(self.policy, cfg.lr)
        self.opt_q1 = AdamState(self.q1, cfg.lr)
        self.opt_q2 = AdamState(self.q2, cfg.lr)

    # -- policy head ---------------------------------------------------

    def policy_heads(self, s: np.ndarray):
        """Mean and clamped log-std heads plus the raw head and cache."""
        out, cache = self.policy.forward(s)
        a = self.action_dim
        mean = out[:, :a]
        ls_raw = out[:, a:]
        ls = np.clip(ls_raw, self.cfg.log_std_min, self.cfg.log_std_max)
        return mean, ls, ls_raw, cache

    def act(self, state_vec: np.ndarray, rng: np.random.Generator,
            deterministic: bool = False) -> np.ndarray:
        """Raw physical action for one state (stochastic unless evaluating)."""
        mean, ls, _, _ = self.policy_heads(state_vec[None, :])
        if deterministic:
            return squashed_mean_action(mean, self.lo, self.hi)[0]
        action, _ = squashed_gaussian_sample(mean, ls, self.lo, self.hi, rng)
        return action[0]

    def normalize_action(self, a: np.ndarray) -> np.ndarray:
        return (a - self.lo) / (self.hi - self.lo)

    def _sample_norm(self, s: np.ndarray, rng: np.random.Generator):
        """Reparameterized sample in critic coordinates with its log-density."""
        mean, ls, _, _ = self.policy_heads(s)
        eps = rng.standard_normal(mean.shape)
        u = mean + np.exp(ls) * eps
        a_norm = 0.5 * (np.tanh(u) + 1.0)
        logp = squashed_log_prob_from_noise(eps, mean, ls, self.lo, self.hi)
        return a_norm, logp

    # -- losses ----------------------------------------------------------

    def critic_loss(self, batch: Batch, rng: np.random.Generator):
        """Soft Bellman residual and gradients for both critics.

        Targets bootstrap on the elementwise minimum of the two target
        critics at a freshly sampled next action, minus the entropy term;
        terminal transitions keep only the reward.
        """
        if len(batch.r) == 0:
            raise ValueError("empty batch")
        a2_norm, logp2 = self._sample_norm(batch.s_next, rng)
        xin2 = np.concatenate([batch.s_next, a2_norm], axis=1)
        q1t, _ = self.q1_target.forward(xin2)
        q2t, _ = self.q2_target.forward(xin2)
        soft_v = np.minimum(q1t[:, 0], q2t[:, 0]) - self.cfg.alpha * logp2
        y = batch.r + self.cfg.gamma * (1.0 - batch.done) * soft_v

        xin = np.concatenate([batch.s, self.normalize_action(batch.a)], axis=1)
        n = len(batch.r)
        losses = []
        grads = []
        for net in (self.q1, self.q2):
            q, cache = net.forward(xin)
            err = q[:, 0] - y
            losses.append(0.5 * float(err @ err) / n)
            g, _ = net.backward(cache, (err / n)[:, None])
            grads.append(g)
        return 0.5 * (losses[0] + losses[1]), grads[0], grads[1]

    def policy_loss(self, batch: Batch, rng: np.random.Generator):
        """Reparameterized policy objective and its gradient.

        The gradient flows both through the exact log-density and through
        the critic input; only the pointwise-smaller critic carries the
        value gradient for each sample.
        """
        if len(batch.r) == 0:
            raise ValueError("empty batch")
        s = batch.s
        n = len(s)
        a = self.action_dim
        mean, ls, ls_raw, cache = self.policy_heads(s)
        eps = rng.standard_normal(mean.shape)
        sigma = np.exp(ls)
        u = mean + sigma * eps
        y = np.tanh(u)
        a_norm = 0.5 * (y + 1.0)
        logp = np.sum(-0.5 * eps ** 2 - ls - 0.5 * np.log(2.0 * np.pi)
                      - log1m_tanh_sq(u) - np.log(0.5 * (self.hi - self.lo)),
                      axis=-1)

        xin = np.concatenate([s, a_norm], axis=1)
        q1v, c1 = self.q1.forward(xin)
        q2v, c2 = self.q2.forward(xin)
        use1 = (q1v[:, 0] <= q2v[:, 0])
        minq = np.where(use1, q1v[:, 0], q2v[:, 0])
        loss = float(np.mean(self.cfg.alpha * logp - minq))

        # d(-mean minq)/d critic input, routed through the argmin critic
        w1 = use1.astype(float)
        g1 = self.q1.backward(c1, (-w1 / n)[:, None])[1]
        g2 = self.q2.backward(c2, ((w1 - 1.0) / n)[:, None])[1]
        gq_anorm = (g1 + g2)[:, self.state_dim:]

        da_du = 0.5 * (1.0 - y ** 2)
        alpha_n = self.cfg.alpha / n
        # d log-density: 2*tanh(u) through u; -1 explicitly through log-std
        g_mean = alpha_n * (2.0 * y) + gq_anorm * da_du
        g_ls = (alpha_n * (-1.0 + 2.0 * y * sigma * eps)
                + gq_anorm * da_du * sigma * eps)
        # the clamp blocks gradients outside the configured log-std range
        g_ls = g_ls * ((ls_raw >= self.cfg.log_std_min)
                       & (ls_raw <= self.cfg.log_std_max))
        grad_out = np.concatenate([g_mean, g_ls], axis=1)
        grads, _ = self.policy.backward(cache, grad_out)
        return loss, grads

    # -- updates -----------------------------------------------------------

    def soft_update(self) -> None:
        """Exponential moving average of critic parameters into the targets."""
        tau = self.cfg.tau
        for net, target in ((self.q1, self.q1_target), (self.q2, self.q2_target)):
            for p, tp in zip(net.params(), target.params()):
                tp *= 1.0 - tau
                tp += tau * p

    def update(self, batch: Batch, rng: np.random.Generator):
        """One gradient iteration: critics, then policy, then targets."""
        closs, g1, g2 = self.critic_loss(batch, rng)
        adam_step(self.q1, g1, self.opt_q1)
        adam_step(self.q2, g2, self.opt_q2)
        ploss, gp = self.policy_loss(batch, rng)
        adam_step(self.policy, gp, self.opt_policy)
        self.soft_update()
        return closs, ploss

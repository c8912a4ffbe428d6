"""Configuration dataclasses, defaults, and strict JSON loading.

The defaults reproduce the reference simulation setup, so an experiment
file only lists the keys it changes. Unknown keys are rejected so a typo
cannot silently fall back to a default.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from dataclasses import field as dataclass_field
from pathlib import Path


class ConfigError(ValueError):
    """Raised for unreadable, malformed, or inconsistent experiment configs."""


@dataclass(frozen=True)
class ChannelParams:
    """Air-to-ground channel constants (remote-area defaults)."""

    f_c: float = 2.4e9          # carrier frequency, Hz
    c: float = 3.0e8            # propagation speed, m/s
    h: float = 4.88             # environment constant in the LoS-probability curve
    l: float = 0.43             # environment constant in the LoS-probability curve
    eta_los: float = 0.1        # excess LoS loss, dB
    eta_nlos: float = 21.0      # excess NLoS loss, dB

    def __post_init__(self):
        if self.f_c <= 0 or self.c <= 0:
            raise ConfigError("channel: f_c and c must be positive")
        if self.h <= 0 or self.l <= 0:
            raise ConfigError("channel: h and l must be positive")
        if not 0 <= self.eta_los <= self.eta_nlos:
            raise ConfigError("channel: need 0 <= eta_los <= eta_nlos")


@dataclass(frozen=True)
class WorldConfig:
    """Physical, channel, and episode constants of the network."""

    T: float = 4.0              # total flight time, s
    N: int = 40                 # slot count
    M: int = 4                  # terminal count
    H: float = 5.0              # UAV altitude, m
    B: float = 40e6             # offloading bandwidth, Hz
    sigma2: float = 1e-9        # receiver noise power, W
    eta0: float = 0.8           # WPT conversion efficiency
    zeta_c: float = 1e-28       # effective capacitance coefficient
    C: float = 100.0            # CPU cycles per raw bit
    delta: float = 1.0          # upload bits per raw bit
    P_e: float = 0.1            # UAV transmit power, W
    v_max: float = 30.0         # max UAV speed, m/s
    field: tuple[float, float] = (18.0, 18.0)   # rectangle (0,0)-(w,h), m
    q_S: tuple[float, float] = (0.0, 0.0)       # start point
    q_D: tuple[float, float] = (18.0, 18.0)     # destination center
    dest_radius: float = 1.0    # arrival tolerance, m
    e_init: tuple[float, ...] | float = 1e-3    # initial battery per terminal, J
    p_max: float = 0.1          # max terminal transmit power, W
    f_max: float = 3e8          # max terminal CPU frequency, cycles/s
    e_ref: float = 0.0          # battery normalization for state encoding; 0 -> max(e_init)
    channel: ChannelParams = dataclass_field(default_factory=ChannelParams)

    def __post_init__(self):
        if self.T <= 0 or self.N < 1 or self.M < 1 or self.H <= 0:
            raise ConfigError("world: need T>0, N>=1, M>=1, H>0")
        if not 0 < self.eta0 <= 1:
            raise ConfigError("world: need 0 < eta0 <= 1")
        if self.delta < 1:
            raise ConfigError("world: need delta >= 1")
        if self.dest_radius <= 0 or self.p_max <= 0 or self.f_max <= 0:
            raise ConfigError("world: dest_radius, p_max, f_max must be positive")
        if self.B <= 0 or self.sigma2 <= 0 or self.zeta_c <= 0 or self.C <= 0:
            raise ConfigError("world: B, sigma2, zeta_c, C must be positive")
        if self.v_max <= 0 or self.P_e < 0:
            raise ConfigError("world: need v_max > 0 and P_e >= 0")
        w, h = self.field
        if w <= 0 or h <= 0:
            raise ConfigError("world: field sides must be positive")
        for name, pt in (("q_S", self.q_S), ("q_D", self.q_D)):
            if not (0 <= pt[0] <= w and 0 <= pt[1] <= h):
                raise ConfigError(f"world: {name} must lie inside the field")
        e = self.e_init
        if isinstance(e, (int, float)):
            e = (float(e),) * self.M
        else:
            e = tuple(float(x) for x in e)
        if len(e) != self.M:
            raise ConfigError(f"world: e_init needs {self.M} entries, got {len(e)}")
        if any(x < 0 for x in e):
            raise ConfigError("world: e_init entries must be non-negative")
        object.__setattr__(self, "e_init", e)
        if self.e_ref <= 0:
            object.__setattr__(self, "e_ref", max(max(e), 1e-12))

    @property
    def slot_dt(self) -> float:
        return self.T / self.N


def _alternating_directions(m: int) -> tuple[float, ...]:
    # reference setup: odd-indexed terminals head +x, even-indexed head -x
    return tuple(0.0 if i % 2 == 0 else math.pi for i in range(m))


@dataclass(frozen=True)
class MobilityParams:
    """Per-terminal Gauss-Markov motion parameters (tuples of length M)."""

    k1: tuple[float, ...]         # speed memory in [0,1]
    k2: tuple[float, ...]         # direction memory in [0,1]
    v_bar: tuple[float, ...]      # mean speed, m/s
    theta_bar: tuple[float, ...]  # mean direction, rad
    phi_mean: tuple[float, ...]   # speed-noise mean
    phi_std: tuple[float, ...]    # speed-noise standard deviation
    psi_mean: tuple[float, ...]   # direction-noise mean
    psi_std: tuple[float, ...]    # direction-noise standard deviation
    initial_positions: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        m = len(self.k1)
        for name in ("k2", "v_bar", "theta_bar", "phi_mean", "phi_std", "psi_mean", "psi_std"):
            if len(getattr(self, name)) != m:
                raise ConfigError(f"mobility: {name} needs {m} entries")
        if any(not 0 <= k <= 1 for k in self.k1 + self.k2):
            raise ConfigError("mobility: k1, k2 must lie in [0, 1]")
        if any(s < 0 for s in self.phi_std + self.psi_std):
            raise ConfigError("mobility: noise std must be non-negative")

    @classmethod
    def uniform(cls, m: int, k1=0.9, k2=0.9, v_bar=2.0, theta_bar=None,
                phi_mean=0.0, phi_std=math.sqrt(2.0), psi_mean=0.0, psi_std=1.0,
                initial_positions=None) -> "MobilityParams":
        """Broadcast scalar parameters to all m terminals."""
        def tup(x):
            if isinstance(x, (int, float)):
                return (float(x),) * m
            return tuple(float(v) for v in x)
        tb = _alternating_directions(m) if theta_bar is None else tup(theta_bar)
        pos = None
        if initial_positions is not None:
            pos = tuple((float(p[0]), float(p[1])) for p in initial_positions)
        return cls(tup(k1), tup(k2), tup(v_bar), tb, tup(phi_mean), tup(phi_std),
                   tup(psi_mean), tup(psi_std), pos)


@dataclass(frozen=True)
class RewardParams:
    """Constants of the per-slot and end-of-flight reward."""

    omega: int = 4          # fairness exponent (non-negative integer)
    A1: float = 500.0       # arrival constant
    A2: float = 80.0        # distance penalty slope, per meter
    A3: float = 4.9e-4      # computation-reward scale
    sparse_mode: bool = False

    def __post_init__(self):
        if self.omega < 0 or int(self.omega) != self.omega:
            raise ConfigError("reward: omega must be a non-negative integer")
        if self.A1 <= 0 or self.A2 <= 0 or self.A3 <= 0:
            raise ConfigError("reward: A1, A2, A3 must be positive")


@dataclass(frozen=True)
class AgentConfig:
    """Learner hyperparameters."""

    alpha: float = 0.2              # entropy temperature
    gamma: float = 0.8              # discount
    tau: float = 0.002              # target smoothing coefficient
    lr: float = 1e-4                # learning rate
    batch_size: int = 128
    memory_capacity: int = 100_000
    update_interval_slots: int = 100
    grad_steps_per_update: int = 1
    warmup_random_slots: int = 1000
    hidden: tuple[int, ...] = (400, 400, 400)
    log_std_min: float = -20.0
    log_std_max: float = 2.0

    def __post_init__(self):
        if not 0 <= self.gamma <= 1:
            raise ConfigError("agent: need 0 <= gamma <= 1")
        if not 0 < self.tau <= 1:
            raise ConfigError("agent: need 0 < tau <= 1")
        if self.alpha < 0:
            raise ConfigError("agent: need alpha >= 0")
        if self.lr < 0 or self.batch_size < 1 or self.memory_capacity < 1:
            raise ConfigError("agent: bad lr/batch_size/memory_capacity")
        if self.update_interval_slots < 1 or self.grad_steps_per_update < 0:
            raise ConfigError("agent: bad update cadence")
        if self.log_std_min >= self.log_std_max:
            raise ConfigError("agent: need log_std_min < log_std_max")
        if not self.hidden or any(n < 1 for n in self.hidden):
            raise ConfigError("agent: hidden layer sizes must be positive")


BASELINE_KINDS = ("hfh", "straight", "greedy_local", "greedy_offload", "random")
HYBRID_MODES = ("none", "alloc", "traj")


@dataclass(frozen=True)
class RunConfig:
    """Experiment driver settings."""

    episodes: int = 1000
    seeds: tuple[int, ...] = (0,)
    eval_interval: int = 0          # episodes between deterministic evals; 0 = final only
    eval_episodes: int = 100
    out_dir: str = "runs/exp"
    baseline: str | None = None
    hybrid: str = "none"
    checkpoint_interval: int = 0    # episodes; 0 = final checkpoint only
    mobility_schedule: tuple[tuple[int, MobilityParams], ...] = ()

    def __post_init__(self):
        if self.episodes < 0 or self.eval_episodes < 1:
            raise ConfigError("run: bad episodes/eval_episodes")
        if self.eval_interval < 0 or self.checkpoint_interval < 0:
            raise ConfigError("run: intervals must be non-negative")
        if not self.seeds:
            raise ConfigError("run: need at least one seed")
        if self.baseline is not None and self.baseline not in BASELINE_KINDS:
            raise ConfigError(f"run: baseline must be one of {BASELINE_KINDS}")
        if self.hybrid not in HYBRID_MODES:
            raise ConfigError(f"run: hybrid must be one of {HYBRID_MODES}")
        if self.hybrid == "alloc" and self.baseline not in ("hfh", "straight"):
            raise ConfigError("run: hybrid 'alloc' needs baseline 'hfh' or 'straight'")
        if self.hybrid == "traj" and self.baseline not in ("greedy_local", "greedy_offload"):
            raise ConfigError("run: hybrid 'traj' needs baseline 'greedy_local' or 'greedy_offload'")


@dataclass(frozen=True)
class ExperimentConfig:
    world: WorldConfig = dataclass_field(default_factory=WorldConfig)
    mobility: MobilityParams | None = None
    reward: RewardParams = dataclass_field(default_factory=RewardParams)
    agent: AgentConfig = dataclass_field(default_factory=AgentConfig)
    run: RunConfig = dataclass_field(default_factory=RunConfig)

    def __post_init__(self):
        if self.mobility is None:
            object.__setattr__(self, "mobility", MobilityParams.uniform(self.world.M))
        if len(self.mobility.k1) != self.world.M:
            raise ConfigError("mobility: parameter length must equal world.M")
        if self.mobility.initial_positions is not None:
            if len(self.mobility.initial_positions) != self.world.M:
                raise ConfigError("mobility: initial_positions needs world.M entries")
            w, h = self.world.field
            for x, y in self.mobility.initial_positions:
                if not (0 <= x <= w and 0 <= y <= h):
                    raise ConfigError("mobility: initial_positions must lie inside the field")


# ---------------------------------------------------------------------------
# strict dict -> dataclass builders

def _check_keys(d: dict, allowed, path: str):
    unknown = sorted(set(d) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key '{path}.{unknown[0]}'")


def _num(d, key, default, path, kind=float):
    v = d.get(key, default)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}.{key}: expected a number")
    if kind is int and int(v) != v:
        raise ConfigError(f"{path}.{key}: expected an integer")
    return kind(v)


def _pair(d, key, default, path):
    v = d.get(key, default)
    if not (isinstance(v, (list, tuple)) and len(v) == 2):
        raise ConfigError(f"{path}.{key}: expected a pair [x, y]")
    return (float(v[0]), float(v[1]))


def _build_channel(d: dict, path="channel") -> ChannelParams:
    base = ChannelParams()
    _check_keys(d, ("f_c", "c", "h", "l", "eta_los", "eta_nlos"), path)
    return ChannelParams(
        f_c=_num(d, "f_c", base.f_c, path), c=_num(d, "c", base.c, path),
        h=_num(d, "h", base.h, path), l=_num(d, "l", base.l, path),
        eta_los=_num(d, "eta_los", base.eta_los, path),
        eta_nlos=_num(d, "eta_nlos", base.eta_nlos, path))


def _build_world(d: dict, path="world") -> WorldConfig:
    base = WorldConfig()
    keys = ("T", "N", "M", "H", "B", "sigma2", "eta0", "zeta_c", "C", "delta", "P_e",
            "v_max", "field", "q_S", "q_D", "dest_radius", "e_init", "p_max", "f_max",
            "e_ref", "channel")
    _check_keys(d, keys, path)
    ch = d.get("channel", {})
    if not isinstance(ch, dict):
        raise ConfigError(f"{path}.channel: expected an object")
    e_init = d.get("e_init", base.e_init)
    if isinstance(e_init, (list, tuple)):
        e_init = tuple(float(x) for x in e_init)
    return WorldConfig(
        T=_num(d, "T", base.T, path), N=_num(d, "N", base.N, path, int),
        M=_num(d, "M", base.M, path, int), H=_num(d, "H", base.H, path),
        B=_num(d, "B", base.B, path), sigma2=_num(d, "sigma2", base.sigma2, path),
        eta0=_num(d, "eta0", base.eta0, path), zeta_c=_num(d, "zeta_c", base.zeta_c, path),
        C=_num(d, "C", base.C, path), delta=_num(d, "delta", base.delta, path),
        P_e=_num(d, "P_e", base.P_e, path), v_max=_num(d, "v_max", base.v_max, path),
        field=_pair(d, "field", base.field, path), q_S=_pair(d, "q_S", base.q_S, path),
        q_D=_pair(d, "q_D", base.q_D, path),
        dest_radius=_num(d, "dest_radius", base.dest_radius, path),
        e_init=e_init, p_max=_num(d, "p_max", base.p_max, path),
        f_max=_num(d, "f_max", base.f_max, path),
        e_ref=_num(d, "e_ref", base.e_ref, path),
        channel=_build_channel(ch, f"{path}.channel"))


_MOBILITY_KEYS = ("k1", "k2", "v_bar", "theta_bar", "phi_mean", "phi_spread",
                  "psi_mean", "psi_spread", "spread_is_variance", "initial_positions")


def _build_mobility(d: dict, m: int, path="mobility") -> MobilityParams:
    _check_keys(d, _MOBILITY_KEYS, path)
    as_var = d.get("spread_is_variance", True)
    if not isinstance(as_var, bool):
        raise ConfigError(f"{path}.spread_is_variance: expected true/false")

    def std_of(key, default):
        v = d.get(key, default)
        vals = (v,) * m if isinstance(v, (int, float)) else tuple(float(x) for x in v)
        if len(vals) != m:
            raise ConfigError(f"{path}.{key}: needs {m} entries")
        return tuple(math.sqrt(x) if as_var else float(x) for x in vals)

    pos = d.get("initial_positions")
    if pos is not None:
        pos = tuple((float(p[0]), float(p[1])) for p in pos)
    return MobilityParams.uniform(
        m,
        k1=d.get("k1", 0.9), k2=d.get("k2", 0.9), v_bar=d.get("v_bar", 2.0),
        theta_bar=d.get("theta_bar"),
        phi_mean=d.get("phi_mean", 0.0), phi_std=std_of("phi_spread", 2.0),
        psi_mean=d.get("psi_mean", 0.0), psi_std=std_of("psi_spread", 1.0),
        initial_positions=pos)


def _build_reward(d: dict, path="reward") -> RewardParams:
    base = RewardParams()
    _check_keys(d, ("omega", "A1", "A2", "A3", "sparse_mode"), path)
    sparse = d.get("sparse_mode", base.sparse_mode)
    if not isinstance(sparse, bool):
        raise ConfigError(f"{path}.sparse_mode: expected true/false")
    return RewardParams(
        omega=_num(d, "omega", base.omega, path, int),
        A1=_num(d, "A1", base.A1, path), A2=_num(d, "A2", base.A2, path),
        A3=_num(d, "A3", base.A3, path), sparse_mode=sparse)


def _build_agent(d: dict, path="agent") -> AgentConfig:
    base = AgentConfig()
    keys = ("alpha", "gamma", "tau", "lr", "batch_size", "memory_capacity",
            "update_interval_slots", "grad_steps_per_update", "warmup_random_slots",
            "hidden", "log_std_min", "log_std_max")
    _check_keys(d, keys, path)
    hidden = d.get("hidden", list(base.hidden))
    if not isinstance(hidden, (list, tuple)):
        raise ConfigError(f"{path}.hidden: expected a list of layer sizes")
    return AgentConfig(
        alpha=_num(d, "alpha", base.alpha, path), gamma=_num(d, "gamma", base.gamma, path),
        tau=_num(d, "tau", base.tau, path), lr=_num(d, "lr", base.lr, path),
        batch_size=_num(d, "batch_size", base.batch_size, path, int),
        memory_capacity=_num(d, "memory_capacity", base.memory_capacity, path, int),
        update_interval_slots=_num(d, "update_interval_slots", base.update_interval_slots, path, int),
        grad_steps_per_update=_num(d, "grad_steps_per_update", base.grad_steps_per_update, path, int),
        warmup_random_slots=_num(d, "warmup_random_slots", base.warmup_random_slots, path, int),
        hidden=tuple(int(n) for n in hidden),
        log_std_min=_num(d, "log_std_min", base.log_std_min, path),
        log_std_max=_num(d, "log_std_max", base.log_std_max, path))


def _build_run(d: dict, mobility_raw: dict, m: int, path="run") -> RunConfig:
    base = RunConfig()
    keys = ("episodes", "seeds", "eval_interval", "eval_episodes", "out_dir",
            "baseline", "hybrid", "checkpoint_interval", "mobility_schedule")
    _check_keys(d, keys, path)
    seeds = d.get("seeds", list(base.seeds))
    if not isinstance(seeds, (list, tuple)) or not all(isinstance(s, int) for s in seeds):
        raise ConfigError(f"{path}.seeds: expected a list of integers")
    out_dir = d.get("out_dir", base.out_dir)
    if not isinstance(out_dir, str):
        raise ConfigError(f"{path}.out_dir: expected a string")
    baseline = d.get("baseline", base.baseline)
    if baseline is not None and not isinstance(baseline, str):
        raise ConfigError(f"{path}.baseline: expected a string or null")
    hybrid = d.get("hybrid", base.hybrid)

    schedule = []
    for i, entry in enumerate(d.get("mobility_schedule", [])):
        epath = f"{path}.mobility_schedule[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError(f"{epath}: expected an object")
        _check_keys(entry, ("episode", "mobility"), epath)
        if "episode" not in entry or "mobility" not in entry:
            raise ConfigError(f"{epath}: needs 'episode' and 'mobility'")
        ep = entry["episode"]
        if not isinstance(ep, int) or ep < 1:
            raise ConfigError(f"{epath}.episode: expected a positive integer")
        merged = dict(mobility_raw)
        merged.update(entry["mobility"])
        schedule.append((ep, _build_mobility(merged, m, f"{epath}.mobility")))
    schedule.sort(key=lambda kv: kv[0])

    return RunConfig(
        episodes=_num(d, "episodes", base.episodes, path, int),
        seeds=tuple(seeds),
        eval_interval=_num(d, "eval_interval", base.eval_interval, path, int),
        eval_episodes=_num(d, "eval_episodes", base.eval_episodes, path, int),
        out_dir=out_dir, baseline=baseline, hybrid=hybrid,
        checkpoint_interval=_num(d, "checkpoint_interval", base.checkpoint_interval, path, int),
        mobility_schedule=tuple(schedule))


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Build a validated config from a plain dict (e.g. parsed JSON)."""
    if not isinstance(raw, dict):
        raise ConfigError("config root must be an object")
    _check_keys(raw, ("world", "mobility", "reward", "agent", "run"), "config")
    for key in ("world", "mobility", "reward", "agent", "run"):
        if key in raw and not isinstance(raw[key], dict):
            raise ConfigError(f"config.{key}: expected an object")
    world = _build_world(raw.get("world", {}))
    mobility_raw = raw.get("mobility", {})
    mobility = _build_mobility(mobility_raw, world.M)
    reward = _build_reward(raw.get("reward", {}))
    agent = _build_agent(raw.get("agent", {}))
    run = _build_run(raw.get("run", {}), mobility_raw, world.M)
    return ExperimentConfig(world=world, mobility=mobility, reward=reward,
                            agent=agent, run=run)


def load_config(path: str | Path) -> ExperimentConfig:
    """Load and validate an experiment config from a JSON file."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {p}: {e}") from e
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{p}:{e.lineno}:{e.colno}: {e.msg}") from e
    return config_from_dict(raw)


def resolved_dict(cfg: ExperimentConfig) -> dict:
    """Plain-dict echo of a config with every default made explicit."""
    d = dataclasses.asdict(cfg)
    d["run"]["mobility_schedule"] = [
        {"episode": ep, "mobility": dataclasses.asdict(mp)}
        for ep, mp in cfg.run.mobility_schedule
    ]
    return d


def dump_config(cfg: ExperimentConfig) -> str:
    """Canonical JSON serialization used for config echoes and manifests."""
    return json.dumps(resolved_dict(cfg), sort_keys=True, indent=2)


def replace_in_config(cfg: ExperimentConfig, dotted: str, value) -> ExperimentConfig:
    """Return a copy of cfg with one `section.key` entry replaced."""
    try:
        section, key = dotted.split(".", 1)
    except ValueError:
        raise ConfigError(f"parameter path '{dotted}' must look like section.key") from None
    if section not in ("world", "mobility", "reward", "agent", "run"):
        raise ConfigError(f"unknown config section '{section}'")
    block = getattr(cfg, section)
    if key not in {f.name for f in dataclasses.fields(block)}:
        raise ConfigError(f"unknown config key '{dotted}'")
    new_block = dataclasses.replace(block, **{key: value})
    return dataclasses.replace(cfg, **{section: new_block})

"""Acceptance suite: every exit criterion at its stated tolerance.

Each test prints one `[criterion NN] PASS/FAIL` line (visible with
`pytest -rA` or `-s`). Criteria 6-8 share one desk-scale training matrix
(3 reward variants x 5 seeds, a few minutes of CPU) built once per session.
"""

import dataclasses
import io
import json
import math

import numpy as np
import pytest
import scipy.stats

from uavmec import baselines, env, harness, mobility
from uavmec.config import (AgentConfig, ExperimentConfig, MobilityParams,
                           WorldConfig, config_from_dict)
from uavmec.neural import flatten_grads, squashed_log_prob
from uavmec.reward import FairnessAccumulator, arrival_reward, fairness_index
from uavmec.sac import SacAgent, action_bounds, state_dim
from uavmec.sim import EpisodeSim
from uavmec.trainer import Trainer, evaluate_policy, load_checkpoint

import oracles
from desk import DESK_SEEDS, desk_config, episodes_to_arrival
from test_sac import random_batch, small_agent


def report(criterion: int, ok: bool, detail: str = "") -> None:
    print(f"[criterion {criterion:02d}] {'PASS' if ok else 'FAIL'} {detail}".rstrip())
    assert ok, f"criterion {criterion}: {detail}"


# -- 1: formula oracles -------------------------------------------------------------

def test_criterion_01_formula_oracles():
    rng = np.random.default_rng(101)
    worst = 0.0

    def track(got, want):
        nonlocal worst
        err = abs(got - want) / max(abs(want), 1e-300)
        worst = max(worst, err)
        return err

    for _ in range(100):
        cfg = WorldConfig(
            H=float(rng.uniform(2.0, 50.0)),
            channel=dataclasses.replace(WorldConfig().channel,
                                        f_c=float(rng.uniform(0.7e9, 6e9))))
        qu = rng.uniform(0.0, 18.0, 2)
        qm = rng.uniform(0.0, 18.0, 2)
        ch = cfg.channel
        track(env.channel_gain(qu, qm, cfg),
              oracles.channel_gain_hp(qu, qm, cfg.H, ch.f_c, ch.c, ch.h, ch.l,
                                      ch.eta_los, ch.eta_nlos))
    cfg = WorldConfig()
    for _ in range(100):
        t, p, g = rng.uniform(0, 1), rng.uniform(0, 0.1), rng.uniform(1e-9, 1e-4)
        track(env.offload_bits(t, p, g, cfg),
              oracles.offload_bits_hp(t, p, g, cfg.T, cfg.N, cfg.delta, cfg.B, cfg.sigma2))
        f = rng.uniform(0, 3e8)
        track(env.local_bits(f, cfg), oracles.local_bits_hp(f, cfg.T, cfg.N, cfg.C))
        track(env.harvested_energy(g, cfg),
              oracles.harvested_energy_hp(g, cfg.eta0, cfg.T, cfg.N, cfg.P_e))
        u = rng.uniform(0, 1e8, size=int(rng.integers(2, 9)))
        track(fairness_index(u), oracles.fairness_index_hp(u))
        pos = rng.uniform(0.0, 18.0, 2)
        from uavmec.config import RewardParams
        params = RewardParams(sparse_mode=bool(rng.integers(0, 2)))
        track(arrival_reward(pos, params, cfg) + 1e3,  # offset avoids zero crossing
              oracles.arrival_reward_hp(pos, cfg.q_D, params.A1, params.A2,
                                        params.sparse_mode, cfg.dest_radius) + 1e3)
    report(1, worst <= 1e-9, f"max relative error {worst:.2e} (tolerance 1e-9)")


# -- 2: constraint suite -------------------------------------------------------------

def test_criterion_02_constraint_suite():
    exp = ExperimentConfig()  # reference world: M=4, N=40
    world = exp.world
    ss = np.random.SeedSequence(202).spawn(3)
    sim = EpisodeSim(world, exp.mobility, np.random.default_rng(ss[0]),
                     mobility.spawn_rngs(ss[1], world.M))
    rng = np.random.default_rng(ss[2])
    w, h = world.field
    violations = 0
    worst_ledger = 0.0
    for _ in range(10_000):
        state = sim.reset()
        ledger = state.e.copy()
        for _ in range(world.N):
            out, executed = sim.step(baselines.random_act(state, world, rng))
            nxt = out.next_state
            if (executed.t.sum() > 1.0 + 1e-12 or np.any(nxt.e < 0.0)
                    or not (0.0 <= nxt.q_u[0] <= w and 0.0 <= nxt.q_u[1] <= h)
                    or np.any((nxt.q[:, 0] < 0) | (nxt.q[:, 0] > w))
                    or np.any((nxt.q[:, 1] < 0) | (nxt.q[:, 1] > h))):
                violations += 1
            ledger += out.harvested - out.consumed
            state = nxt
        rel = np.max(np.abs(state.e - ledger) / np.maximum(np.abs(ledger), 1e-30))
        worst_ledger = max(worst_ledger, float(rel))
    ok = violations == 0 and worst_ledger <= 1e-9
    report(2, ok, f"violations={violations}, worst ledger error {worst_ledger:.2e}")


# -- 3: fairness bounds and consistency ------------------------------------------------

def test_criterion_03_fairness_bounds_and_consistency():
    rng = np.random.default_rng(303)
    ok = True
    for _ in range(10_000):
        m = int(rng.integers(2, 9))
        u = rng.uniform(0.0, 10.0 ** rng.uniform(0, 8), size=m)
        i = fairness_index(u)
        ok &= (1.0 / m) - 1e-12 <= i <= 1.0 + 1e-12
    # incremental index at the last slot equals the from-scratch evaluation
    for _ in range(100):
        acc = FairnessAccumulator.create(4)
        slots = rng.uniform(0.0, 1e5, size=(40, 4))
        for row in slots:
            acc.add(row)
        totals = np.zeros(4)
        for row in slots:
            totals += row
        ok &= fairness_index(acc.cum_bits) == fairness_index(totals)
    for _ in range(100):
        u = rng.uniform(0.0, 1e6, size=4)
        for c in (1e-7, 13.0, 1e7):
            ok &= abs(fairness_index(c * u) - fairness_index(u)) <= 1e-12
    report(3, ok, "bounds, incremental consistency, scale invariance")


# -- 4: gradient checks ----------------------------------------------------------------

def test_criterion_04_gradient_checks():
    worst = 0.0
    inst = 0
    for width in (8, 16):
        for k in range(5):
            agent, _ = small_agent(width=width, layers=2)
            batch = random_batch(agent, 4, seed=1000 + inst)
            _, g1, g2 = agent.critic_loss(batch, np.random.default_rng(inst))
            analytic = [0.5 * g for g in flatten_grads(g1) + flatten_grads(g2)]
            numeric = oracles.finite_diff_grads(
                lambda: agent.critic_loss(batch, np.random.default_rng(inst))[0],
                agent.q1.params() + agent.q2.params(), step=1e-6)
            worst = max(worst, oracles.grad_rel_error(analytic, numeric))
            inst += 1
        for k in range(5):
            agent, _ = small_agent(width=width, layers=2)
            batch = random_batch(agent, 4, seed=2000 + inst)
            _, grads = agent.policy_loss(batch, np.random.default_rng(inst))
            numeric = oracles.finite_diff_grads(
                lambda: agent.policy_loss(batch, np.random.default_rng(inst))[0],
                agent.policy.params(), step=1e-6)
            worst = max(worst, oracles.grad_rel_error(flatten_grads(grads), numeric))
            inst += 1
    report(4, worst <= 1e-4, f"{inst} instances, max relative error {worst:.2e}")


# -- 5: squashed-density normalization ----------------------------------------------------

def test_criterion_05_density_normalization():
    rng = np.random.default_rng(505)
    lo = np.array([-1.3])
    hi = np.array([2.1])
    worst = 0.0
    xs = oracles.squash_warped_grid(lo[0], hi[0], 400_001)
    for _ in range(10):
        mean = rng.uniform(-2.0, 2.0, size=(1,))
        log_std = rng.uniform(-1.5, 0.4, size=(1,))
        ys = np.exp(squashed_log_prob(xs[:, None], mean, log_std, lo, hi))
        total = float(np.trapezoid(ys, xs))
        worst = max(worst, abs(total - 1.0))
    report(5, worst <= 1e-3, f"max |integral - 1| = {worst:.2e}")


# -- 6/7/8: desk-scale training matrix -------------------------------------------------------

def _train_variant(cfg, seed):
    trainer = Trainer(cfg, seed)
    records = trainer.run(cfg.run.episodes)
    eval_summary, _ = trainer.evaluate(cfg.run.eval_episodes)
    return {"ep2arr": episodes_to_arrival(records), "eval": eval_summary}


@pytest.fixture(scope="session")
def desk_runs():
    from desk import fairness_study_config
    out = {}
    for name, cfg in (("progress", desk_config()),
                      ("sparse", desk_config(sparse=True)),
                      ("omega4", fairness_study_config(omega=4)),
                      ("omega0", fairness_study_config(omega=0))):
        out[name] = [_train_variant(cfg, seed) for seed in DESK_SEEDS]
    cfg = desk_config()
    out["floor"], _ = evaluate_policy(
        cfg, seed=0, episodes=500,
        policy_fn=lambda s, svec, rng: baselines.random_act(s, cfg.world, rng))
    return out


def test_criterion_06_learning_smoke(desk_runs):
    floor = desk_runs["floor"]["return_mean"]
    trained = float(np.mean([r["eval"]["return_mean"] for r in desk_runs["progress"]]))
    need = floor + 0.5 * abs(floor)
    report(6, trained >= need,
           f"trained mean return {trained:.1f} vs random floor {floor:.1f} "
           f"(threshold {need:.1f})")


def test_criterion_07_arrival_reward_ablation(desk_runs):
    never = 10 ** 9  # not reaching the threshold counts as slower
    wins = 0
    pairs = []
    for p, s in zip(desk_runs["progress"], desk_runs["sparse"]):
        pe = p["ep2arr"] if p["ep2arr"] is not None else never
        se = s["ep2arr"] if s["ep2arr"] is not None else never
        wins += pe < se
        pairs.append((p["ep2arr"], s["ep2arr"]))
    report(7, wins >= 4, f"progress faster on {wins}/5 seeds; "
                         f"(progress, sparse) episodes to 0.9: {pairs}")


def test_criterion_08_omega_tradeoff(desk_runs):
    f4 = float(np.mean([r["eval"]["fairness_mean"] for r in desk_runs["omega4"]]))
    f0 = float(np.mean([r["eval"]["fairness_mean"] for r in desk_runs["omega0"]]))
    b4 = float(np.mean([r["eval"]["bits_mean"] for r in desk_runs["omega4"]]))
    b0 = float(np.mean([r["eval"]["bits_mean"] for r in desk_runs["omega0"]]))
    report(8, f4 > f0 and b4 < b0,
           f"fairness w=4: {f4:.3f} vs w=0: {f0:.3f}; bits w=4: {b4:.3g} vs w=0: {b0:.3g}")


# -- 9: mobility statistics ------------------------------------------------------------------

def test_criterion_09_gmrm_statistics():
    n = 100_000
    var = 2.0
    params = MobilityParams.uniform(1, k1=0.0, k2=0.0, v_bar=10.0,
                                    phi_std=math.sqrt(var), psi_std=1.0)
    cfg = WorldConfig(M=1, e_init=1e-3)
    rngs = mobility.spawn_rngs(np.random.SeedSequence(909), 1)
    state = mobility.init_state(params)
    pos = np.array([[9.0, 9.0]])
    vs = np.empty(n)
    for i in range(n):
        state, disp = mobility.gmrm_step(state, pos, params, rngs, cfg)
        pos = pos + disp
        vs[i] = state.v[0]
    se = math.sqrt(var / n)
    mean_ok = abs(vs.mean() - 10.0) <= 3 * se
    s2 = vs.var(ddof=1)
    stat = (n - 1) * s2 / var
    lo_q, hi_q = scipy.stats.chi2.ppf([0.005, 0.995], n - 1)
    var_ok = lo_q <= stat <= hi_q

    frozen = MobilityParams.uniform(1, k1=1.0, k2=1.0, v_bar=3.0, theta_bar=0.4,
                                    phi_std=math.sqrt(var), psi_std=1.0)
    st = mobility.init_state(frozen)
    rngs = mobility.spawn_rngs(np.random.SeedSequence(910), 1)
    pos = np.array([[9.0, 9.0]])
    const_ok = True
    for _ in range(1000):
        st, disp = mobility.gmrm_step(st, pos, frozen, rngs, cfg)
        pos = pos + disp
        const_ok &= st.v[0] == 3.0
    report(9, mean_ok and var_ok and const_ok,
           f"mean {vs.mean():.4f} (3se={3*se:.4f}), var {s2:.4f} "
           f"(chi2 stat {stat:.0f} in [{lo_q:.0f},{hi_q:.0f}]), k=1 constant={const_ok}")


# -- 10: determinism ----------------------------------------------------------------------------

def test_criterion_10_run_determinism(tmp_path):
    cfg = desk_config(episodes=25)
    harness.run_experiment(cfg, out_dir=tmp_path / "a", seed_override=1)
    harness.run_experiment(cfg, out_dir=tmp_path / "b", seed_override=1)
    a = (tmp_path / "a" / "seed_1" / "metrics.jsonl").read_bytes()
    b = (tmp_path / "b" / "seed_1" / "metrics.jsonl").read_bytes()
    report(10, a == b and len(a) > 0, f"{len(a)} bytes, byte-identical={a == b}")


# -- 11: checkpoint fidelity ----------------------------------------------------------------------

def test_criterion_11_checkpoint_fidelity(tmp_path):
    # update_interval 2 on N=10 episodes: 5 updates per episode,
    # so 20 further episodes = 100 further gradient updates; shorten the
    # random warmup so updates are flowing well before the checkpoint
    import desk
    raw = json.loads(json.dumps(desk.DESK_RAW))
    raw["agent"]["warmup_random_slots"] = 150
    raw["run"]["episodes"] = 60
    cfg = config_from_dict(raw)
    solid = Trainer(cfg, seed=2)
    solid.run(40)
    updates_at_save = solid.updates
    solid.save_checkpoint(tmp_path / "ckpt.bin")
    solid.run(60)
    assert solid.updates - updates_at_save >= 100

    resumed = load_checkpoint(tmp_path / "ckpt.bin", cfg)
    resumed.run(60)
    same = True
    for net_a, net_b in ((solid.agent.policy, resumed.agent.policy),
                         (solid.agent.q1, resumed.agent.q1),
                         (solid.agent.q2, resumed.agent.q2),
                         (solid.agent.q1_target, resumed.agent.q1_target),
                         (solid.agent.q2_target, resumed.agent.q2_target)):
        for p, q in zip(net_a.params(), net_b.params()):
            same &= bool(np.array_equal(p, q))
    same &= solid.updates == resumed.updates
    report(11, same, f"{solid.updates - updates_at_save} post-checkpoint updates bit-exact")


# -- 12: baseline closed forms ----------------------------------------------------------------------

def test_criterion_12_baseline_closed_forms():
    cfg = WorldConfig()
    st = env.EnvState(np.array([0.0, 0.0]),
                      np.tile([[9.0, 9.0]], (cfg.M, 1)),
                      np.array(cfg.e_init), 1)

    # straight trajectory: per-slot positions on the analytic line
    expect = oracles.straight_line_positions(cfg.q_S, cfg.q_D, cfg.N)
    state = st
    zeros = np.zeros(cfg.M)
    straight_ok = True
    for n in range(cfg.N):
        v, theta = baselines.straight_act(state, cfg)
        out = env.step(state, env.Action(v, theta, zeros, zeros, zeros),
                       np.zeros((cfg.M, 2)), cfg)
        state = out.next_state
        straight_ok &= bool(np.allclose(state.q_u, expect[n + 1], rtol=0, atol=1e-9))

    # greedy allocations against their budget formulas
    rng = np.random.default_rng(1212)
    greedy_ok = True
    for _ in range(200):
        e = rng.uniform(0.0, 1e-3, size=cfg.M)
        s = env.EnvState(np.zeros(2), st.q, e, 1)
        _, f, _ = baselines.greedy_local_alloc(s, cfg)
        p, _, t = baselines.greedy_offload_alloc(s, cfg)
        for m in range(cfg.M):
            want_f = oracles.greedy_local_f_oracle(e[m], cfg.N, cfg.T, cfg.zeta_c, cfg.f_max)
            want_p = oracles.greedy_offload_p_oracle(e[m], cfg.N, cfg.T, t[m], cfg.p_max)
            greedy_ok &= abs(f[m] - want_f) <= 1e-12 * max(want_f, 1.0)
            greedy_ok &= abs(p[m] - want_p) <= 1e-12 * max(want_p, 1.0)

    # hover-follow-hover schedule spans
    hfh_ok = oracles.hfh_schedule_oracle(40, 4, 2) == [
        baselines.hfh_follow_index(n, 2, 40, 4) for n in range(1, 41)]
    hfh_ok &= oracles.hfh_schedule_oracle(40, 4, 7) == [
        baselines.hfh_follow_index(n, 7, 40, 4) for n in range(1, 41)]

    report(12, straight_ok and greedy_ok and hfh_ok,
           f"straight={straight_ok}, greedy={greedy_ok}, hfh={hfh_ok}")

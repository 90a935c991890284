import itertools
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tilestream.abr import a2c
from tilestream.abr.a2c import (Trajectory, advantage, compute_gradients, nstep_returns, policy_gradient_step,
                                sample_action)
from tilestream.abr.allocation import allocate_tiles, knapsack
from tilestream.abr.areas import CORE, OUTSIDE, SURROUND, classify_areas, window_cells
from tilestream.abr.network import (NetShape, PolicyParams, critic_forward, load_params, policy_forward,
                                    save_params, softmax)
from tilestream.abr.reward import chunk_reward, reward
from tilestream.abr.state import N_ACTIONS, AbrState, Action
from tilestream.flowfield import InputError, ViewpointSample
from tilestream.tiling import TileLayout, TileRect, build_layout, fixed_grid_layout

TINY = NetShape(filters=3, hidden=2, n_out=4)


def random_state(rng):
    s = AbrState(buf=float(rng.uniform(0, 8)), rate=float(rng.uniform(0, 8e6)),
                 ratio=float(rng.uniform(0, 1)), acc_out=float(rng.uniform(0, 1)))
    for _ in range(8):
        s = s.push(rng.uniform(0, 100), rng.uniform(0, 3), *rng.uniform(0, 6e6, 3),
                   s.buf, s.rate, s.ratio, s.acc_out)
    return s


# areas

def test_full_fov_all_core():
    lay = build_layout(np.random.default_rng(0).random((12, 24)), 20)
    labels = classify_areas(lay, ViewpointSample(0, 0.0, 0.0), fov=360.0)
    assert set(labels) == {CORE}


def test_window_inside_one_rect():
    # one big middle rect; a 20 degree window at its centre touches nothing else
    rects = [TileRect(1, 4, 1, 24), TileRect(5, 8, 1, 8), TileRect(5, 8, 9, 16), TileRect(5, 8, 17, 24),
             TileRect(9, 12, 1, 24)]
    lay = TileLayout(rects, 5)
    lay.validate()
    labels = classify_areas(lay, ViewpointSample(0, 0.0, 0.0), fov=20.0, margin=30.0)
    # margin window is 80 degrees: yaw -40..40 stays in the middle third, pitch -40..40 reaches rows 4 and 9
    assert labels == [SURROUND, OUTSIDE, CORE, OUTSIDE, SURROUND]


def test_wrap_around():
    core = window_cells(179.0, 0.0, 100.0)
    assert core[:, 0].any() and core[:, -1].any()
    assert not core[:, 12].any()
    labels = classify_areas(fixed_grid_layout(), ViewpointSample(0, 179.0, 0.0))
    lab = np.array(labels).reshape(12, 24)
    assert lab[6, 0] == CORE and lab[6, 23] == CORE and lab[6, 12] == OUTSIDE


@settings(max_examples=50, deadline=None)
@given(st.floats(-180, 180), st.floats(-90, 90), st.floats(1, 200), st.floats(0, 60))
def test_labels_total_and_fov_monotone(yaw, pitch, fov, extra):
    lay = build_layout(np.arange(288.0).reshape(12, 24) % 7, 30)
    vp = ViewpointSample(0, yaw, pitch)
    small = classify_areas(lay, vp, fov)
    big = classify_areas(lay, vp, fov + extra)
    assert len(small) == len(lay.rects)
    assert all(lbl in (CORE, SURROUND, OUTSIDE) for lbl in small)
    assert all(b == CORE for s, b in zip(small, big) if s == CORE)


# reward

def _o(P, Rt=0.0, ratio=0.0):
    return SimpleNamespace(P=P, Rt=Rt, ratio=ratio)


def test_reward_examples():
    assert reward([_o(70)]) == 70
    assert reward([_o(70), _o(60)]) == 120
    assert reward([_o(70, 0.5, 0.1)]) == pytest.approx(53.4)
    with pytest.raises(InputError):
        reward([])


def test_chunk_rewards_sum_to_total():
    rng = np.random.default_rng(0)
    outs = [_o(*rng.uniform(0, [100, 2, 1])) for _ in range(10)]
    per = [chunk_reward(o.P, o.Rt, o.ratio, outs[i - 1].P if i else None) for i, o in enumerate(outs)]
    assert sum(per) == pytest.approx(reward(outs))


@given(st.lists(st.floats(0, 100), min_size=1, max_size=20), st.floats(-50, 50))
def test_reward_translation(Ps, c):
    base = reward([_o(p) for p in Ps])
    assert reward([_o(p + c) for p in Ps]) == pytest.approx(base + len(Ps) * c, abs=1e-6)


# allocation

def test_allocation_examples():
    v = np.array([[0, 30, 40], [0, 30, 40.0]])
    c = np.array([[0, 10, 20], [0, 10, 20]])
    lv = knapsack(v, c, 30)
    assert sorted(lv.tolist()) == [1, 2]
    assert knapsack(v, c, 0).tolist() == [0, 0]
    assert knapsack(v, c, 40).tolist() == [2, 2]
    labels = [CORE, OUTSIDE]
    out = allocate_tiles(labels, {CORE: 100, OUTSIDE: 0}, v, c)
    assert out.tolist() == [2, 0]


def _brute(values, costs, budget):
    n, L = values.shape
    best = -np.inf
    for combo in itertools.product(range(L), repeat=n):
        idx = np.arange(n), np.array(combo)
        if costs[idx].sum() <= budget:
            best = max(best, values[idx].sum())
    return best


def _instance(rng, n, L):
    costs = np.zeros((n, L), dtype=np.int64)
    costs[:, 1:] = np.cumsum(rng.integers(1, 30, (n, L - 1)), axis=1)
    values = np.zeros((n, L))
    values[:, 1:] = np.cumsum(rng.uniform(0, 20, (n, L - 1)), axis=1)
    return values, costs


def test_knapsack_matches_enumeration():
    rng = np.random.default_rng(11)
    for _ in range(500):
        n, L = int(rng.integers(1, 7)), int(rng.integers(2, 5))
        values, costs = _instance(rng, n, L)
        budget = int(rng.integers(0, costs[:, -1].sum() + 5))
        lv = knapsack(values, costs, budget)
        idx = np.arange(n), lv
        assert costs[idx].sum() <= budget
        assert values[idx].sum() == pytest.approx(_brute(values, costs, budget))


def test_knapsack_budget_monotone_coarse_units():
    rng = np.random.default_rng(5)
    values, costs = _instance(rng, 40, 6)
    costs = costs * 997
    prev = -np.inf
    for budget in np.linspace(0, costs[:, -1].sum(), 60):
        lv = knapsack(values, costs, budget, max_units=64)
        assert costs[np.arange(40), lv].sum() <= budget
        total = values[np.arange(40), lv].sum()
        assert total >= prev - 1e-9
        prev = total


# state and network

def test_action_index_roundtrip():
    for i in range(N_ACTIONS):
        assert Action.from_index(i).index == i
    with pytest.raises(InputError):
        Action(6, 0, 0)


def test_distribution_and_zero_output():
    rng = np.random.default_rng(0)
    p = PolicyParams.init(0)
    for _ in range(5):
        pi = policy_forward(random_state(rng), p)
        assert pi.shape == (216,) and np.all(pi >= 0) and abs(pi.sum() - 1) < 1e-6
    z = PolicyParams.init(0, zero_output=True)
    pi = policy_forward(random_state(rng), z)
    np.testing.assert_allclose(pi, 1 / 216, rtol=1e-6)
    assert critic_forward(random_state(rng), z) == 0.0


def test_nonfinite_state_rejected():
    s = AbrState(buf=float("nan"))
    with pytest.raises(InputError):
        policy_forward(s, PolicyParams.init(0))


def test_params_roundtrip(tmp_path):
    p = PolicyParams.init(3, TINY)
    save_params(p, tmp_path / "p.bin")
    q = load_params(tmp_path / "p.bin")
    for a, b in ((p.actor, q.actor), (p.critic, q.critic)):
        for k in a.params:
            assert a.params[k].tobytes() == b.params[k].tobytes()
    data = (tmp_path / "p.bin").read_bytes()
    assert data[:4] == b"OFBP"
    (tmp_path / "bad.bin").write_bytes(b"XXXX" + data[4:])
    with pytest.raises(InputError):
        load_params(tmp_path / "bad.bin")


def _flat(g):
    return np.concatenate([g[k].ravel() for k in sorted(g)])


def _rel_err(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(a) + np.linalg.norm(b), 1e-12)


def _fd(net, f, h=1e-5, h_kink=1e-7):
    """Central differences with step ``h``.

    A coordinate whose step straddles a ReLU kink gives a one-sided blend, not
    a derivative; it shows up as disagreement with a much smaller step, and
    the smaller-step estimate is used for it instead.
    """
    out = {}
    for k, w in net.params.items():
        g = np.zeros_like(w)
        it = np.nditer(w, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            old = w[i]

            def central(step):
                w[i] = old + step
                up = f()
                w[i] = old - step
                dn = f()
                w[i] = old
                return (up - dn) / (2 * step)

            g[i] = central(h)
            fine = central(h_kink)
            if abs(fine - g[i]) > 1e-6 * max(1.0, abs(fine)):
                g[i] = fine
        out[k] = g
    return out


def gradient_check(seed):
    """Relative errors of actor and critic gradients against central differences."""
    rng = np.random.default_rng(seed)
    p = PolicyParams.init(seed, TINY, dtype=np.float64)
    states = [random_state(rng) for _ in range(3)]
    actions = [int(a) for a in rng.integers(0, 4, 3)]
    traj = Trajectory(states, actions, list(rng.normal(0, 1, 3)), bootstrap_state=random_state(rng))
    w_ent = 0.05
    g_a, g_c, _ = compute_gradients(p, traj, gamma=0.9, n_step=2, entropy_weight=w_ent)

    hist, scal = a2c.batch_features(states)
    values = p.critic.forward(hist, scal)[0][:, 0]
    boot = critic_forward(traj.bootstrap_state, p)
    returns = nstep_returns(traj.rewards, values, boot, 0.9, 2)
    adv = returns - values

    def actor_loss():
        pi = softmax(p.actor.forward(hist, scal)[0])
        logp = np.log(pi)
        ent = -(pi * logp).sum(axis=1)
        return -(adv * logp[np.arange(3), actions]).sum() - w_ent * ent.sum()

    def critic_loss():
        v = p.critic.forward(hist, scal)[0][:, 0]
        return 0.5 * ((returns - v) ** 2).sum()

    fa = _fd(p.actor, actor_loss)
    fc = _fd(p.critic, critic_loss)
    return _rel_err(_flat(g_a), _flat(fa)), _rel_err(_flat(g_c), _flat(fc))


def test_gradient_check():
    for seed in range(10):
        ea, ec = gradient_check(seed)
        assert ea <= 1e-4 and ec <= 1e-4


# training rule

def test_advantage_examples():
    assert advantage([1, 2, 3], 0, 0, 1.0) == 6
    assert advantage([1], 4, 2, 0.5) == 1
    assert advantage([0, 0, 0], 5, 5, 1.0) == 0


def test_zero_advantage_keeps_actor():
    # rewards 0 and a zero critic make every advantage 0
    rng = np.random.default_rng(0)
    p = PolicyParams.init(0, TINY, dtype=np.float64, zero_output=True)
    p.critic.params["out_w"][:] = 0
    traj = Trajectory([random_state(rng) for _ in range(4)], [0, 1, 2, 3], [0.0] * 4)
    q = policy_gradient_step(p, traj, gamma=0.99, alpha_lr=0.1)
    for k in p.actor.params:
        np.testing.assert_array_equal(p.actor.params[k], q.actor.params[k])


def test_critic_moves_with_nonzero_advantage():
    rng = np.random.default_rng(1)
    p = PolicyParams.init(0, TINY, dtype=np.float64)
    s = random_state(rng)
    q = policy_gradient_step(p, Trajectory([s], [0], [5.0]), alpha_lr=1e-3)
    assert critic_forward(s, q) != critic_forward(s, p)


def bandit_run(steps=5000, lr=0.1, seed=0):
    """Two states, four actions, reward 1 only for each state's dominant action."""
    states = (AbrState(buf=1.0), AbrState(buf=6.0))
    dominant = (1, 3)
    p = PolicyParams.init(seed, NetShape(filters=16, hidden=16, n_out=4), dtype=np.float64)
    rng = np.random.default_rng(seed)
    for step in range(steps):
        i = step % 2
        a = sample_action(p, states[i], rng)
        r = 1.0 if a == dominant[i] else 0.0
        p = policy_gradient_step(p, Trajectory([states[i]], [a], [r]), alpha_lr=lr, critic_lr=lr)
    return [policy_forward(s, p)[d] for s, d in zip(states, dominant)]


def test_bandit_converges():
    assert min(bandit_run()) >= 0.99


def test_nonfinite_gradient_raises():
    rng = np.random.default_rng(0)
    p = PolicyParams.init(0, TINY, dtype=np.float64)
    traj = Trajectory([random_state(rng)], [0], [float("inf")])
    with pytest.raises(a2c.TrainingError):
        compute_gradients(p, traj)


def test_entropy_schedule():
    cfg = a2c.TrainConfig(episodes=11)
    assert cfg.entropy_weight(0) == pytest.approx(0.01)
    assert cfg.entropy_weight(10) == pytest.approx(0.001)


# trainer

def _toy_env(seed=0, chunks=20):
    from conftest import static_viewpoint, toy_manifest
    from tilestream.sim import TrainingEnv
    from tilestream.synth import gen_synthetic_bw

    m = toy_manifest(chunks=chunks, seed=seed)
    bw = gen_synthetic_bw("two_band", duration=60, high=8e6, low=1e6, period=10)
    vp = static_viewpoint(chunks + 1)
    return m, bw, vp, (lambda w: TrainingEnv([(m, vp)], [bw]))


def test_zero_episodes_keeps_params():
    *_, factory = _toy_env()
    p = PolicyParams.init(0, TINY)
    best, rows = a2c.train(factory, a2c.TrainConfig(episodes=0, shape=TINY), params=p.copy())
    assert rows == []
    assert all(np.array_equal(best.actor.params[k], p.actor.params[k]) for k in p.actor.params)


def test_training_log_deterministic():
    *_, factory = _toy_env()
    cfg = a2c.TrainConfig(episodes=4, seed=3, shape=TINY)
    _, r1 = a2c.train(factory, cfg)
    _, r2 = a2c.train(factory, cfg)
    assert r1 == r2 and len(r1) == 4
    assert set(r1[0]) == set(a2c.LOG_FIELDS)


def test_trained_beats_random_and_initial():
    from tilestream.sim import RandomController, RLController, run_session

    m, bw, vp, factory = _toy_env(seed=1)

    def score(params):
        return run_session(RLController(params), m, bw, vp).total_reward

    init = PolicyParams.init(0)
    cfg = a2c.TrainConfig(episodes=60, seed=0, actor_lr=3e-4, critic_lr=1e-3, validate_every=10)
    best, _ = a2c.train(factory, cfg, validate=score, params=init.copy())
    rnd = np.mean([run_session(RandomController(s), m, bw, vp).total_reward for s in range(5)])
    assert score(best) >= score(init)
    assert score(best) >= rnd + 0.2 * abs(rnd)

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rescuesim import game
from rescuesim.learning import (ActionGrid, AgentConfig, DQNAgent, GreedyAgent, QNetwork, ReplayMemory,
                                StateWindow, TabularQAgent, encode_state, make_agents, qnet_forward,
                                run_dynamic_game, select_action, train_step)
from rescuesim.sim.config import DEFAULTS

P = game.GameParams()


def direct_forward(params, plane, output_relu, heads, n):
    """Plain-loop convolution network, written independently of the im2col path."""
    relu = lambda z: np.maximum(z, 0.0)
    x = plane.reshape(1, 6, 6)
    w1, b1 = params["w1"], params["b1"]
    a1 = np.zeros((20, 4, 4))
    for f in range(20):
        for i in range(4):
            for j in range(4):
                a1[f, i, j] = np.sum(w1[f] * x[:, i:i + 3, j:j + 3]) + b1[f]
    a1 = relu(a1)
    w2, b2 = params["w2"], params["b2"]
    a2 = np.zeros((40, 3, 3))
    for f in range(40):
        for i in range(3):
            for j in range(3):
                a2[f, i, j] = np.sum(w2[f] * a1[:, i:i + 2, j:j + 2]) + b2[f]
    a2 = relu(a2).reshape(-1)
    a3 = relu(params["w3"] @ a2 + params["b3"])
    out = params["w4"] @ a3 + params["b4"]
    if output_relu:
        out = relu(out)
    return out.reshape(heads, n)


# ---- network ---------------------------------------------------------------------


@pytest.mark.parametrize("heads,relu", [(1, False), (1, True), (3, False)])
def test_forward_matches_direct_implementation(heads, relu):
    rng = np.random.default_rng(11)
    net = QNetwork.init(22, rng, heads=heads, output_relu=relu)
    for _ in range(5):
        plane = rng.random((6, 6))
        np.testing.assert_allclose(net.forward(plane), direct_forward(net.params, plane, relu, heads, 22),
                                   atol=1e-6, rtol=0)


def test_layer_shapes():
    net = QNetwork.init(12, np.random.default_rng(0), heads=2)
    assert net.params["w1"].shape == (20, 1, 3, 3)
    assert net.params["w2"].shape == (40, 20, 2, 2)
    assert net.params["w3"].shape == (180, 360)
    assert net.params["w4"].shape == (24, 180)
    assert net.forward(np.zeros((6, 6))).shape == (2, 12)
    assert net.forward(np.zeros((5, 6, 6))).shape == (5, 2, 12)


def test_zero_weights_zero_output():
    net = QNetwork.zeros(22)
    assert np.all(qnet_forward(net, np.random.default_rng(0).random((6, 6))) == 0)


def test_forward_rejects_bad_shape():
    net = QNetwork.zeros(12)
    with pytest.raises(ValueError):
        net.forward(np.zeros((5, 5)))


def test_loss_gradient_matches_finite_differences():
    rng = np.random.default_rng(2)
    net = QNetwork.init(12, rng, heads=2, output_relu=False)
    planes = rng.random((3, 6, 6))
    actions = rng.integers(12, size=(3, 2))
    targets = rng.normal(size=(3, 2))
    _, g = net.loss_and_grads(planes, actions, targets)
    h = 1e-6
    for name in ("w1", "b1", "w2", "b2", "w3", "b3", "w4", "b4"):
        w = net.params[name]
        for idx in [tuple(rng.integers(s) for s in w.shape) for _ in range(4)]:
            old = w[idx]
            w[idx] = old + h
            lp, _ = net.loss_and_grads(planes, actions, targets)
            w[idx] = old - h
            lm, _ = net.loss_and_grads(planes, actions, targets)
            w[idx] = old
            fd = (lp - lm) / (2 * h)
            assert g[name][idx] == pytest.approx(fd, rel=1e-4, abs=1e-7), name


def test_zero_td_error_leaves_weights_unchanged():
    rng = np.random.default_rng(4)
    net = QNetwork.init(12, rng)
    plane = rng.random((6, 6))
    q = net.forward(plane)
    before = {k: v.copy() for k, v in net.params.items()}
    _, g = net.loss_and_grads(plane[None], [[3]], [[q[0, 3]]])
    net.sgd(g, 0.1)
    for k in before:
        np.testing.assert_array_equal(before[k], net.params[k])


def test_bandit_fixed_point():
    rng = np.random.default_rng(5)
    net = QNetwork.init(4, rng, output_relu=False)
    mem = ReplayMemory(10, rng)
    plane = rng.random((6, 6))
    mem.push(plane, [2], [0.7], plane)
    for _ in range(300):
        train_step(net, mem, gamma=0.0, updates=4, lr=1e-2)
    assert net.forward(plane)[0, 2] == pytest.approx(0.7, abs=1e-3)


def test_adam_also_descends():
    rng = np.random.default_rng(6)
    net = QNetwork.init(4, rng, output_relu=False)
    plane = rng.random((1, 6, 6))
    l0, _ = net.loss_and_grads(plane, [[1]], [[2.0]])
    for _ in range(50):
        _, g = net.loss_and_grads(plane, [[1]], [[2.0]])
        net.sgd(g, 1e-3, optimizer="adam")
    l1, _ = net.loss_and_grads(plane, [[1]], [[2.0]])
    assert l1 < l0
    with pytest.raises(ValueError):
        net.sgd(g, 1e-3, optimizer="rmsprop")


def test_checkpoint_round_trip(tmp_path):
    net = QNetwork.init(12, np.random.default_rng(0), heads=2, output_relu=False)
    net.save(tmp_path / "w.npz")
    back = QNetwork.load(tmp_path / "w.npz")
    assert (back.n_actions, back.heads, back.output_relu) == (12, 2, False)
    plane = np.random.default_rng(1).random((6, 6))
    np.testing.assert_array_equal(net.forward(plane), back.forward(plane))


def test_checkpoint_version_check(tmp_path):
    np.savez(tmp_path / "bad.npz", format_version=np.array(99), meta=np.array([1, 1, 0]))
    with pytest.raises(ValueError):
        QNetwork.load(tmp_path / "bad.npz")


# ---- grids, windows, memory, policy ---------------------------------------------------------


def test_action_grid():
    g = ActionGrid(22, 11.0)
    assert g.values[0] == 0 and g.values[-1] == pytest.approx(11.0)
    assert np.allclose(np.diff(g.values), 11.0 / 21)
    assert g.nearest(1.2) == 2
    assert g.nearest(-3) == 0 and g.nearest(99) == 21
    with pytest.raises(ValueError):
        ActionGrid(1, 1.0)


def test_encode_state_padding():
    w = StateWindow(history=11, dim=1, scale=1.0)
    assert np.all(encode_state(w) == 0)
    for v in range(12):
        w.push((v + 1) / 12)
    flat = encode_state(w).reshape(-1)
    assert np.allclose(flat[:12], np.arange(1, 13) / 12)
    assert np.all(flat[12:] == 0)
    assert not w.truncated


def test_encode_state_truncates_oldest():
    w = StateWindow(history=11, dim=4, scale=1.0)  # 48 entries
    for v in range(12):
        w.push(np.full(4, v / 11))
    flat = encode_state(w).reshape(-1)
    assert w.truncated
    assert np.allclose(flat[-4:], 1.0)
    assert np.allclose(flat[:4], 3 / 11)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=1, max_size=30), st.floats(0.1, 20))
def test_encoded_entries_in_unit_interval(values, scale):
    w = StateWindow(history=11, dim=1, scale=scale)
    for v in values:
        w.push(v)
    plane = encode_state(w)
    assert plane.shape == (6, 6)
    assert np.all((plane >= 0) & (plane <= 1))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 20), st.integers(0, 80))
def test_replay_memory_fifo(capacity, n):
    mem = ReplayMemory(capacity, np.random.default_rng(0))
    for i in range(n):
        mem.push(i, [0], [0.0], i)
    assert len(mem) == min(capacity, n)
    assert [e[0] for e in mem.items] == list(range(max(0, n - capacity), n))


def test_replay_memory_rejects_zero_capacity():
    with pytest.raises(ValueError):
        ReplayMemory(0, np.random.default_rng(0))


def test_select_action_conventions():
    rng = np.random.default_rng(0)
    q = np.array([0.1, 0.9, 0.3])
    assert all(select_action(q, 1.0, rng) == 1 for _ in range(100))
    assert select_action(np.zeros(5), 1.0, rng) == 0
    with pytest.raises(ValueError):
        select_action(q, 1.5, rng)


def test_select_action_uniform_when_eps_zero():
    rng = np.random.default_rng(1)
    n, k = 10_000, 12
    counts = np.bincount([select_action(np.arange(k), 0.0, rng) for _ in range(n)], minlength=k)
    expected = n / k
    sigma = np.sqrt(n * (1 / k) * (1 - 1 / k))
    assert np.all(np.abs(counts - expected) < 3 * sigma + 1)
    chi2 = float(np.sum((counts - expected) ** 2 / expected))
    assert chi2 < 31.26  # 99.9% quantile, 11 degrees of freedom


# ---- agents -----------------------------------------------------------------------


def test_first_slots_are_random():
    cfg = AgentConfig(history=11)
    ag = DQNAgent(ActionGrid(12, 6.0), 11.0, cfg, np.random.default_rng(0))
    seen = []
    for _ in range(11):
        ag.observe(1.0)
        seen.append(int(ag.act()[0]))
        ag.reward(1.0)
    assert len(set(seen)) > 3


def test_greedy_agent_plays_grid_best_response():
    grid = ActionGrid(12, 6.0)
    ag = GreedyAgent(grid, lambda xs, y: game.vehicle_payoff(xs, y, P))
    for y in (0.2, 0.6545, 1.5, 11.0):
        ag.observe(y)
        a = int(ag.act()[0])
        assert a == int(np.argmax(game.vehicle_payoff(grid.values, y, P)))
    ag.observe(0.6545)
    assert grid.value(ag.act()[0]) == pytest.approx(game.best_response_aocr(0.6545, P), abs=1e-3)


def test_tabular_vehicle_table_shape():
    learn = DEFAULTS["learning"]
    uav, (veh,) = make_agents("qlearn", P, learn, 0)
    assert veh.q.shape == (22, 12)
    assert uav.q.shape == (12, 22)


def test_tabular_gamma_zero_is_empirical_mean():
    grid = ActionGrid(3, 1.0)
    cfg = AgentConfig(gamma=0.0, history=0, reward_scale=1.0, tabular_lr=0.005)
    ag = TabularQAgent(grid, grid, cfg, np.random.default_rng(0))
    rng = np.random.default_rng(1)
    rewards = []
    for _ in range(4000):
        ag.observe(0.0)
        ag.act()
        ag._action = 1
        r = rng.normal(2.0, 0.5)
        rewards.append(r)
        ag.reward(r)
    ag.observe(0.0)
    assert ag.q[0, 1] == pytest.approx(np.mean(rewards), abs=0.1)


def test_vehicle_learns_fixed_payment_best_response():
    grid = ActionGrid(12, 6.0)
    y = 0.6545  # best response 3.2727 sits on the grid (level 6)
    cfg = AgentConfig(eps=0.95, lr=3e-3, batch=16, reward_scale=0.05)
    ag = DQNAgent(grid, 11.0, cfg, np.random.default_rng(0))
    greedy = []
    for _ in range(2000):
        ag.observe(y)
        a = ag.act()[0]
        greedy.append(int(ag.greedy[0]))
        ag.reward(game.vehicle_payoff(grid.value(a), y, P))
    target = int(np.argmax(game.vehicle_payoff(grid.values, y, P)))
    assert target == 6
    assert np.mean(np.array(greedy[-500:]) == target) > 0.5


def test_reward_matches_game_payoff():
    learn = {**DEFAULTS["learning"], "slots": 30}
    tr = run_dynamic_game(P, learn, "greedy", seed=0)
    for n in range(30):
        assert tr.vehicle_reward[n, 0] == pytest.approx(game.vehicle_payoff(tr.x[n, 0], tr.y[n, 0], P))
        assert tr.uav_reward[n] == pytest.approx(game.uav_payoff(tr.x[n, 0], tr.y[n, 0], P))


def test_dynamic_game_deterministic():
    learn = {**DEFAULTS["learning"], "slots": 60}
    a = run_dynamic_game(P, learn, "dqn", seed=3)
    b = run_dynamic_game(P, learn, "dqn", seed=3)
    np.testing.assert_array_equal(a.x, b.x)
    np.testing.assert_array_equal(a.y, b.y)
    c = run_dynamic_game(P, learn, "dqn", seed=4)
    assert not np.array_equal(a.y, c.y)


def test_multi_vehicle_heads_and_truncation_note():
    learn = {**DEFAULTS["learning"], "slots": 20}
    tr = run_dynamic_game(P, learn, "dqn", seed=0, vehicles=4)
    assert tr.x.shape == (20, 4) and tr.y.shape == (20, 4)
    assert any("36" in n for n in tr.notes)
    with pytest.raises(ValueError):
        run_dynamic_game(P, learn, "qlearn", seed=0, vehicles=2)
    with pytest.raises(ValueError):
        run_dynamic_game(P, learn, "sarsa", seed=0)


def test_greedy_vehicle_answers_current_payment():
    learn = {**DEFAULTS["learning"], "slots": 50}
    tr = run_dynamic_game(P, learn, "greedy", seed=0)
    vgrid = ActionGrid(DEFAULTS["learning"]["levels_vehicle"], P.x_max)
    # myopic play: the vehicle always answers the payment it was just offered
    for n in range(50):
        best = vgrid.values[np.argmax(game.vehicle_payoff(vgrid.values, tr.y[n, 0], P))]
        assert tr.x[n, 0] == pytest.approx(best)


def test_trace_csv(tmp_path):
    learn = {**DEFAULTS["learning"], "slots": 5}
    tr = run_dynamic_game(P, learn, "dqn", seed=0)
    tr.write_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "slot,agent,action,greedy_action,reward,eps"
    assert len(lines) == 1 + 5 * 2


def test_checkpoints_written(tmp_path):
    learn = {**DEFAULTS["learning"], "slots": 10}
    run_dynamic_game(P, learn, "dqn", seed=0, checkpoint_dir=tmp_path, checkpoint_every=5)
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["uav_10.npz", "uav_5.npz", "vehicle0_10.npz", "vehicle0_5.npz"]
    QNetwork.load(tmp_path / "uav_10.npz")

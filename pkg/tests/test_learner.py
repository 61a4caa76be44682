import random
from collections import Counter
from dataclasses import replace
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uavplan.learner import (
    Algorithm,
    HyperparamError,
    Hyperparams,
    QTable,
    greedy_rollout,
    q_learning_update,
    sarsa_update,
    select_action,
    train,
)
from uavplan.mdp import Action, Transition, apply_action
from uavplan.oracle import optimal_return, value_iteration
from uavplan.scenario import CellCoord, build_coverage

from conftest import make_scenario, random_scenario

S0, S1 = CellCoord(0, 0), CellCoord(1, 0)


def _table():
    return QTable(3, 3, 8)


# -- updates ----------------------------------------------------------------


def test_q_update_plain_step():
    q = _table()
    t = Transition(S0, Action.E, S1, -1.0, False)
    assert q_learning_update(q, t, Hyperparams(alpha=0.1, gamma=0.9)) == pytest.approx(-0.1, abs=1e-12)
    assert q[S0, Action.E] == pytest.approx(-0.1, abs=1e-12)


def test_q_update_terminal():
    q = _table()
    q[S0, Action.E] = 2.0
    q.values[q.index(S1)] = 50.0  # ignored: terminal bootstrap is zero
    t = Transition(S0, Action.E, S1, 10.0, True)
    assert q_learning_update(q, t, Hyperparams(alpha=0.5, gamma=0.9)) == pytest.approx(6.0, abs=1e-12)


def test_sarsa_update_example():
    q = _table()
    q[S1, Action.S] = -2.0
    q[S1, Action.N] = 4.0  # the max; SARSA must not use it
    t = Transition(S0, Action.E, S1, -1.0, False)
    got = sarsa_update(q, t, Action.S, Hyperparams(alpha=0.1, gamma=0.9))
    assert got == pytest.approx(-0.28, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.floats(-50, 50), min_size=8, max_size=8),
    st.floats(-10, 10),
    st.sampled_from([-10.0, -1.0, -0.3, 10.0]),
    st.booleans(),
)
def test_update_changes_one_entry_by_alpha_td(next_row, old, reward, terminal):
    q = _table()
    q[S0, Action.E] = old
    q.values[q.index(S1)] = next_row
    before = q.values.copy()
    t = Transition(S0, Action.E, S1, reward, terminal)
    bootstrap = 0.0 if terminal else max(next_row)
    new = q_learning_update(q, t, Hyperparams(alpha=0.1, gamma=0.9))
    assert len(np.argwhere(q.values != before)) <= 1
    assert new - old == pytest.approx(0.1 * (reward + 0.9 * bootstrap - old), abs=1e-9)


def test_alpha_zero_rejected_by_validation():
    # alpha = 0 is a legal update but not a legal training configuration
    with pytest.raises(HyperparamError):
        Hyperparams(alpha=0.0).validate()
    q = _table()
    q[S0, Action.E] = 3.0
    h = SimpleNamespace(alpha=0.0, gamma=0.9)
    q_learning_update(q, Transition(S0, Action.E, S1, -1.0, False), h)
    sarsa_update(q, Transition(S0, Action.E, S1, 10.0, True), Action.N, h)
    assert q[S0, Action.E] == 3.0


def test_terminal_sarsa_equals_q_learning():
    h = Hyperparams(alpha=0.3, gamma=0.9)
    t = Transition(S0, Action.E, S1, 10.0, True)
    a, b = _table(), _table()
    for q in (a, b):
        q[S0, Action.E] = 1.5
        q.values[q.index(S1)] = [7, -2, 3, 0, 0, 0, 0, 0]
    assert q_learning_update(a, t, h) == sarsa_update(b, t, Action.SW, h)


def test_greedy_next_action_coincides():
    h = Hyperparams(alpha=0.3, gamma=0.9)
    t = Transition(S0, Action.E, S1, -1.0, False)
    a, b = _table(), _table()
    for q in (a, b):
        q.values[q.index(S1)] = [1, -2, 3.5, 0, 0, 0, 0, 0]
    assert q_learning_update(a, t, h) == sarsa_update(b, t, Action.E, h)


# -- action selection -------------------------------------------------------


def test_greedy_selection():
    q = _table()
    q.values[0] = [1, 5, 2, 0, 0, 0, 0, 0]
    rng = random.Random(0)
    assert {select_action(q, S0, 0.0, rng) for _ in range(200)} == {Action.NE}


def test_uniform_exploration():
    q = _table()
    q.values[0] = [1, 5, 2, 0, 0, 0, 0, 0]
    rng = random.Random(12345)
    n = 80_000
    counts = Counter(select_action(q, S0, 1.0, rng) for _ in range(n))
    freqs = np.array([counts[a] / n for a in Action])
    assert np.all(np.abs(freqs - 1 / 8) <= 0.02)
    chi2 = float(np.sum((freqs * n - n / 8) ** 2 / (n / 8)))
    assert chi2 < 24.322  # 0.999 quantile of chi-square with 7 dof


def test_zero_row_tie_break_uniform():
    q = _table()
    n = 40_000
    counts = Counter(select_action(q, S0, 0.0, random.Random(seed)) for seed in range(n))
    freqs = np.array([counts[a] / n for a in Action])
    assert np.all(np.abs(freqs - 1 / 8) <= 0.02)


def test_select_action_consumes_documented_draws():
    q = _table()
    q.values[0] = [0, 3, 3, 0, 0, 0, 3, 0]
    rng = random.Random(7)
    mirror = random.Random(7)
    got = select_action(q, S0, 0.25, rng)
    u = mirror.random()
    if u < 0.25:
        expected = Action(int(mirror.random() * 8))
    else:
        expected = [Action.NE, Action.E, Action.W][int(mirror.random() * 3)]
    assert got == expected
    assert rng.random() == mirror.random()


def test_epsilon_range_checked():
    with pytest.raises(ValueError):
        select_action(_table(), S0, 1.5, random.Random(0))


# -- hyperparameters and tables ---------------------------------------------


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(alpha=1.5), dict(gamma=1.0), dict(epsilon=-0.1), dict(epsilon_decay=0.0),
        dict(epsilon=0.1, epsilon_min=0.2), dict(episodes=0), dict(max_steps_per_episode=0),
        dict(seed=-1), dict(n_actions=6), dict(episodes=10.5),
    ],
)
def test_hyperparam_validation(kwargs):
    with pytest.raises(HyperparamError):
        Hyperparams(**kwargs).validate()


def test_default_step_cap():
    s = make_scenario(40, 16, (0, 8), (39, 7))
    assert Hyperparams().resolved(s).max_steps_per_episode == 224


def test_qtable_dump_load_round_trip(one_step):
    s, cov = one_step
    q, _ = train(s, cov, "qlearning", Hyperparams(episodes=30, seed=3))
    data = q.dumps()
    back = QTable.loads(data, s)
    assert np.array_equal(back.values, q.values)
    assert back.dumps() == data
    with pytest.raises(ValueError, match="3x3"):
        QTable.loads(data, make_scenario(4, 3, (0, 0), (3, 2)))


def test_qtable_rejects_bad_shape():
    with pytest.raises(ValueError):
        QTable(3, 3, 8, np.zeros((9, 4)))


# -- training ---------------------------------------------------------------


@pytest.mark.parametrize("algorithm", list(Algorithm))
def test_one_step_scenario(one_step, algorithm):
    s, cov = one_step
    h = Hyperparams(episodes=200, seed=1)
    q, trace = train(s, cov, algorithm, h)
    assert 9.0 < q[s.start, Action.E] <= 10.0
    path = greedy_rollout(s, cov, q, 10)
    assert path.reached_goal and path.steps == 1 and path.distance_m == 250.0
    assert len(trace.records) == 200
    assert trace.records[-1].reached_goal


@pytest.mark.parametrize("algorithm", list(Algorithm))
def test_seeded_determinism(algorithm):
    s = random_scenario(random.Random(5))
    cov = build_coverage(s)
    h = Hyperparams(episodes=300, seed=42)
    q1, t1 = train(s, cov, algorithm, h)
    q2, t2 = train(s, cov, algorithm, h)
    assert q1.dumps() == q2.dumps()
    assert t1.to_csv() == t2.to_csv()
    q3, _ = train(s, cov, algorithm, replace(h, seed=43))
    assert q3.dumps() != q1.dumps()


def _reference_train(s, cov, algorithm, h):
    """Training assembled from the public single-step functions."""
    h = h.resolved(s)
    q = QTable.zeros(s, h.n_actions)
    rng = random.Random(h.seed)
    eps = h.epsilon
    rewards = []
    for _ in range(h.episodes):
        state, total = s.start, 0.0
        a = select_action(q, state, eps, rng) if algorithm is Algorithm.SARSA else None
        for _ in range(h.max_steps_per_episode):
            if algorithm is Algorithm.Q_LEARNING:
                a = select_action(q, state, eps, rng)
            t = apply_action(s, cov, state, a)
            total += t.reward
            if algorithm is Algorithm.SARSA:
                a2 = None if t.terminal else select_action(q, t.next_state, eps, rng)
                sarsa_update(q, t, a2 if a2 is not None else Action.N, h)
                a = a2
            else:
                q_learning_update(q, t, h)
            if t.terminal:
                break
            state = t.next_state
        rewards.append(total)
        eps = max(h.epsilon_min, eps * h.epsilon_decay)
    return q, rewards


@pytest.mark.parametrize("algorithm", list(Algorithm))
@pytest.mark.parametrize("n_actions", [4, 8])
def test_train_matches_reference_loop(algorithm, n_actions):
    s = random_scenario(random.Random(11), 4, 6)
    cov = build_coverage(s)
    h = Hyperparams(episodes=150, seed=9, n_actions=n_actions, epsilon=0.6)
    q, trace = train(s, cov, algorithm, h)
    ref_q, ref_rewards = _reference_train(s, cov, algorithm, h)
    assert np.array_equal(q.values, ref_q.values)
    assert trace.episode_rewards == ref_rewards


def test_epsilon_schedule_and_cap():
    s = make_scenario(6, 6, (0, 0), (5, 5))
    cov = build_coverage(s)
    h = Hyperparams(episodes=50, epsilon=0.5, epsilon_decay=0.9, epsilon_min=0.05, max_steps_per_episode=7)
    _, trace = train(s, cov, "qlearning", h)
    eps = 0.5
    for r in trace.records:
        assert r.epsilon == eps
        assert r.steps <= 7
        assert r.reached_goal or r.steps == 7
        eps = max(0.05, eps * 0.9)


def test_curve_csv_columns(one_step):
    s, cov = one_step
    _, trace = train(s, cov, "sarsa", Hyperparams(episodes=3))
    lines = trace.to_csv().decode().splitlines()
    assert lines[0] == "episode,cumulative_reward,steps,epsilon,reached_goal"
    assert len(lines) == 4


@pytest.mark.parametrize("algorithm", list(Algorithm))
def test_bounded_and_goal_row_frozen(algorithm):
    s = random_scenario(random.Random(21))
    cov = build_coverage(s)
    h = Hyperparams(episodes=400, seed=2)
    bound = 10 / (1 - h.gamma)
    goal = s.goal.y * s.width_cells + s.goal.x
    seen = []

    def hook(ev):
        row = ev.values[ev.state]
        assert -bound <= row[ev.action] <= bound
        assert not any(ev.values[goal])
        seen.append(ev.step)

    train(s, cov, algorithm, h, hook)
    assert seen


def test_sarsa_on_policy_fidelity():
    s = random_scenario(random.Random(8))
    cov = build_coverage(s)
    events = []
    train(s, cov, "sarsa", Hyperparams(episodes=200, seed=4), events.append)
    for prev, cur in zip(events, events[1:]):
        if cur.episode == prev.episode:
            assert cur.state == prev.next_state
            assert cur.action == prev.next_action
        else:
            assert prev.terminal or prev.step == 4 * (s.width_cells + s.height_cells)
    assert all((e.next_action is None) == e.terminal for e in events)


def test_single_entry_update_during_training():
    s = random_scenario(random.Random(3), 4, 5)
    cov = build_coverage(s)
    h = Hyperparams(episodes=60, seed=1)
    snapshot = [None]

    def hook(ev):
        now = np.array(ev.values)
        if snapshot[0] is not None:
            diff = np.argwhere(now != snapshot[0])
            assert len(diff) <= 1
            if len(diff):
                assert tuple(diff[0]) == (ev.state, ev.action)
                assert now[ev.state, ev.action] - snapshot[0][ev.state, ev.action] == pytest.approx(
                    h.alpha * ev.td_error, abs=1e-12
                )
        snapshot[0] = now

    train(s, cov, "qlearning", h, hook)


def test_untrained_rollout_follows_first_action():
    s = make_scenario(5, 5, (2, 3), (4, 4))
    cov = build_coverage(s)
    path = greedy_rollout(s, cov, QTable.zeros(s), 6)
    assert not path.reached_goal
    assert path.cells == ((2, 3), (2, 2), (2, 1), (2, 0), (2, 0), (2, 0), (2, 0))
    assert path.rewards[-1] == -10.0


def test_rollout_rejects_wrong_shape(one_step):
    s, cov = one_step
    with pytest.raises(ValueError):
        greedy_rollout(s, cov, QTable(4, 4, 8), 5)


@pytest.mark.parametrize("algorithm", list(Algorithm))
def test_converged_ten_by_ten_matches_oracle(algorithm):
    s = make_scenario(10, 10, (0, 0), (9, 9), stations=[(4, 4)])
    cov = build_coverage(s)
    h = Hyperparams(seed=1)
    q, _ = train(s, cov, algorithm, h)
    path = greedy_rollout(s, cov, q, h.resolved(s).max_steps_per_episode)
    v = value_iteration(s, cov, h.gamma)
    assert path.reached_goal
    assert path.discounted_return(h.gamma) == pytest.approx(optimal_return(v, s), abs=1e-9)

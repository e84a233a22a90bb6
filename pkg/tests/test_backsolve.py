import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qwalk.backsolve import backsolve, layer_after_first_step, solve_first_coin, solve_last_coin
from qwalk.core import DomainError, NotReachableError, WalkerState, phase_distance
from qwalk.engineering import assemble_full_state
from qwalk.reachability import reachability_residuals
from qwalk.walk import apply_inverse_step, project_coin, run_walk

from conftest import random_amps, random_coins, random_pair, seeds

BALANCED = np.ones(4) / 2


def test_last_coin_single_step():
    rng = np.random.default_rng(3)
    c = random_coins(rng, 1)[0]
    state = run_walk((1, 0), [c])
    got = solve_last_coin(state, alpha=0.4)
    col, want = got.matrix[:, 0], c.matrix[:, 0]
    assert abs(abs(np.vdot(col, want)) - 1) < 1e-12


@pytest.mark.parametrize("d", [(-0.5j, 0.5 + 0.5j), (0.5j, 0.5 - 0.5j)])
def test_last_coin_balanced_state(d):
    state = assemble_full_state(BALANCED, d)
    coin = solve_last_coin(state)
    prev = apply_inverse_step(state, coin, tol=1e-12)
    assert prev.nsites == 3
    assert abs(prev.amp(1, 1)) < 1e-12 and abs(prev.amp(3, 0)) < 1e-12


@given(seeds)
def test_last_coin_random_four_steps(seed):
    rng = np.random.default_rng(seed)
    state = run_walk(random_pair(rng), random_coins(rng, 4))
    prev = apply_inverse_step(state, solve_last_coin(state), tol=1e-9)
    assert np.abs(reachability_residuals(prev, 3)).max() < 1e-9


def test_last_coin_rejects_unreachable():
    state = WalkerState(np.full((3, 2), 1 / math.sqrt(6)), 1)
    with pytest.raises(NotReachableError) as err:
        solve_last_coin(state)
    assert err.value.context["residual"] == pytest.approx(2 / 6)


def test_last_coin_falls_back_when_first_v_vanishes():
    # v_1 = 0: the coin is fixed by the last v-vector instead
    rng = np.random.default_rng(8)
    amps = np.zeros((3, 2), dtype=complex)
    amps[1, 0], amps[2, 1] = random_amps(rng, 2)
    state = WalkerState(amps / np.linalg.norm(amps), 1)
    coin = solve_last_coin(state)
    prev = apply_inverse_step(state, coin, tol=1e-12)
    assert prev.nsites <= 2


def test_first_coin_examples():
    assert np.allclose(solve_first_coin(WalkerState.localized((1, 0)), (1, 0)).matrix, np.eye(2))
    c = solve_first_coin(WalkerState.from_dict({(2, 1): 1}), (1, 0), start=1)
    assert np.allclose(c.matrix[:, 0], [0, 1])


@given(seeds)
def test_first_coin_random(seed):
    rng = np.random.default_rng(seed)
    init = random_pair(rng)
    layer = random_pair(rng)
    state = WalkerState(np.array([[layer[0], 0], [0, layer[1]]]), 1)
    c = solve_first_coin(state, init)
    assert np.abs(c.matrix @ init - layer).max() < 1e-12


def test_first_coin_norm_mismatch():
    state = WalkerState(np.array([[0.6, 0], [0, 0.6]]), 1)
    with pytest.raises(DomainError):
        solve_first_coin(state, (1, 0))


@given(seeds, st.integers(1, 10))
def test_round_trip(seed, n):
    rng = np.random.default_rng(seed)
    init = random_pair(rng)
    state = run_walk(random_pair(rng), random_coins(rng, n))
    if state.nsites != n + 1:
        return  # a leading/trailing amplitude vanished exactly; not this test's concern
    coins = backsolve(state, init, alphas=rng.uniform(-3, 3, n - 1))
    assert len(coins) == n
    assert run_walk(init, coins).fidelity(state) > 1 - 1e-10


def test_alphas_change_coins_not_state():
    rng = np.random.default_rng(5)
    state = run_walk(random_pair(rng), random_coins(rng, 4))
    a = backsolve(state, (1, 0), alphas=[0, 0, 0])
    b = backsolve(state, (1, 0), alphas=[0.3, -1.0, 2.0])
    assert any(phase_distance(x.matrix, y.matrix) > 1e-3 for x, y in zip(a, b))
    assert run_walk((1, 0), a).fidelity(run_walk((1, 0), b)) > 1 - 1e-12


@given(seeds, st.floats(-math.pi, math.pi))
def test_gauge_covariance(seed, alpha):
    rng = np.random.default_rng(seed)
    state = run_walk(random_pair(rng), random_coins(rng, int(rng.integers(2, 8))))
    base = solve_last_coin(state, 0.0).matrix
    turned = solve_last_coin(state, alpha).matrix
    assert phase_distance(turned, base @ np.diag([1, np.exp(1j * alpha)])) < 1e-10


@given(seeds, st.integers(2, 8))
def test_backward_preservation(seed, n):
    rng = np.random.default_rng(seed)
    state = run_walk(random_pair(rng), random_coins(rng, n))
    for k in range(n, 1, -1):
        state = apply_inverse_step(state, solve_last_coin(state), tol=1e-9)
        assert np.abs(reachability_residuals(state, k - 1)).max() < 1e-9


def test_balanced_pipeline_probability():
    state = assemble_full_state(BALANCED, (0.5j, 0.5 - 0.5j))
    coins = backsolve(state)
    assert len(coins) == 3
    out = run_walk((1, 0), coins)
    assert project_coin(out, (1 / math.sqrt(2), 1 / math.sqrt(2))).probability == pytest.approx(0.25, abs=1e-12)


def test_backsolve_reports_failing_step():
    amps = np.zeros((4, 2), dtype=complex)
    amps[0, 0] = amps[1, 1] = amps[1, 0] = amps[2, 1] = amps[3, 1] = 1
    with pytest.raises(NotReachableError) as err:
        backsolve(WalkerState(amps / np.linalg.norm(amps), 1))
    assert err.value.context["step"] == 3


def test_alphas_length_checked():
    state = run_walk((1, 0), random_coins(np.random.default_rng(1), 3))
    with pytest.raises(DomainError):
        backsolve(state, alphas=[0.0])


def test_layer_after_first_step_matches_walk():
    rng = np.random.default_rng(2)
    init = random_pair(rng)
    coins = random_coins(rng, 4)
    layer = layer_after_first_step(run_walk(init, coins))
    first = coins[0].matrix @ init
    # the column-phase freedom only rephases the two entries
    assert np.allclose(np.abs(layer), np.abs(first), atol=1e-10)


def test_backsolve_rejects_nonzero_endpoints():
    for amps in ([[1, 0], [1, 0]], [[0.6, 0.8], [0, 0]]):
        with pytest.raises(NotReachableError) as info:
            backsolve(WalkerState(np.array(amps, dtype=complex)))
        assert info.value.context["step"] == 1

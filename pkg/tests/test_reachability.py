import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qwalk.backsolve import solve_last_coin
from qwalk.core import DomainError, WalkerState, su2_matrix
from qwalk.reachability import is_reachable, max_reachable_steps, reachability_residuals, v_vectors
from qwalk.walk import apply_inverse_step, apply_step, run_walk, run_walk_amplitudes

from conftest import random_amps, random_coins, random_pair, seeds


def test_v_vectors_examples():
    s = WalkerState(np.array([[1, 0], [0, 1]]), origin=1)
    assert np.allclose(v_vectors(s), [[1, 1]])
    assert len(v_vectors(WalkerState(np.ones((3, 2)), 1))) == 2
    assert len(v_vectors(WalkerState.localized((1, 0)))) == 0


@given(seeds)
def test_v_vectors_index_bookkeeping(seed):
    s = WalkerState(random_amps(np.random.default_rng(seed), (4, 2)), origin=1)
    v = v_vectors(s)
    for i in range(1, 4):
        assert v[i - 1, 0] == s.amp(i, 0)
        assert v[i - 1, 1] == s.amp(i + 1, 1)


def test_one_step_state_is_reachable():
    r = 1 / math.sqrt(2)
    s = WalkerState(np.array([[r, 0], [0, r]]), origin=1)
    res = reachability_residuals(s, 1)
    assert len(res) == 2 and np.all(res == 0)
    assert is_reachable(s, 1)


def test_uniform_state_not_reachable():
    s = WalkerState(np.full((3, 2), 1 / math.sqrt(6)), origin=1)
    res = reachability_residuals(s, 2)
    assert res[2] == pytest.approx(2 / 6)
    assert not is_reachable(s, 2)
    assert max_reachable_steps(s) == 0


def test_step_count_bounds():
    s = WalkerState(np.ones((3, 2)), 1)
    with pytest.raises(DomainError):
        reachability_residuals(s, 3)
    with pytest.raises(DomainError):
        reachability_residuals(s, 0)
    assert not is_reachable(s, 5)


def test_single_site_certifies_nothing():
    r = 1 / math.sqrt(2)
    assert max_reachable_steps(WalkerState.localized((r, r))) == 0


@given(seeds, st.integers(1, 12))
def test_walk_output_is_reachable(seed, n):
    rng = np.random.default_rng(seed)
    out = run_walk(random_pair(rng), random_coins(rng, n))
    assert np.abs(reachability_residuals(out, n)).max() < 1e-9
    assert max_reachable_steps(out) >= n


@given(seeds, st.integers(1, 6))
def test_walk_from_unreachable_start_certifies_exactly_n(seed, n):
    rng = np.random.default_rng(seed)
    start = WalkerState(random_amps(rng, (3, 2)), origin=1).normalized()
    assert max_reachable_steps(start) == 0
    state = start
    for c in random_coins(rng, n):
        state = apply_step(state, c)
    assert max_reachable_steps(state) == n


@given(seeds, st.integers(1, 6), st.integers(0, 3))
def test_closure_under_steps(seed, n, extra):
    rng = np.random.default_rng(seed)
    # reachable in n steps, on n + 1 + extra sites
    start = WalkerState(random_amps(rng, (1 + extra, 2)), origin=1).normalized()
    state = start
    for c in random_coins(rng, n):
        state = apply_step(state, c)
    assert np.abs(reachability_residuals(state, n)).max() < 1e-9
    after = apply_step(state, random_coins(rng, 1)[0])
    assert np.abs(reachability_residuals(after, n + 1)).max() < 1e-9


@given(seeds, st.integers(2, 8))
def test_backward_consistency(seed, n):
    rng = np.random.default_rng(seed)
    state = run_walk(random_pair(rng), random_coins(rng, n))
    coin = solve_last_coin(state, alpha=rng.uniform(-3, 3))
    prev = apply_inverse_step(state, coin, tol=1e-9)
    assert prev.nsites == n
    assert np.abs(reachability_residuals(prev, n - 1)).max() < 1e-9


def _real_jacobian(fn, x, h=1e-6):
    cols = []
    for k in range(len(x)):
        e = np.zeros(len(x))
        e[k] = h
        cols.append((fn(x + e) - fn(x - e)) / (2 * h))
    return np.array(cols).T


def _rank(jac):
    sv = np.linalg.svd(jac, compute_uv=False)
    return int(np.sum(sv > 1e-7 * sv[0]))


def _residual_map(n):
    def fn(x):
        amps = (x[: 2 * (n + 1)] + 1j * x[2 * (n + 1) :]).reshape(n + 1, 2)
        res = reachability_residuals(WalkerState(amps, 1), n)
        return np.concatenate([res.real, res.imag])

    return fn


def _forward_map(n):
    def fn(x):
        init = x[0:2] + 1j * x[2:4]
        mats = []
        for k in range(n):
            theta, xi, zeta, phase = x[4 + 4 * k : 8 + 4 * k]
            mats.append(np.exp(1j * phase) * su2_matrix(theta, xi, zeta))
        amps = run_walk_amplitudes(init, mats).reshape(-1)
        return np.concatenate([amps.real, amps.imag])

    return fn


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_constraint_count(n):
    rng = np.random.default_rng(n)
    params = rng.uniform(0.2, 1.3, 4 + 4 * n)
    fwd = _forward_map(n)
    point = fwd(params)
    ambient = 4 * (n + 1)
    res_rank = _rank(_real_jacobian(_residual_map(n), point))
    fwd_rank = _rank(_real_jacobian(fwd, params))
    # every residual is an independent real condition ...
    assert res_rank == 2 * (n - 1) + 4
    # ... and together they carve out exactly the image of the walk
    assert res_rank + fwd_rank == ambient
    # normalization and global phase aside, the reachable set has dimension 2n
    assert fwd_rank - 2 == 2 * n

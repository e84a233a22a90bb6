import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qwalk.core import IDENTITY, DomainError, NotReachableError, WalkerState, coin_from_params
from qwalk.reachability import reachability_residuals
from qwalk.walk import (
    apply_inverse_step,
    apply_step,
    project_coin,
    run_walk,
    step_amplitudes,
    target_fidelity,
)

from conftest import random_amps, random_coins, random_pair, seeds

R2 = 1 / math.sqrt(2)
ROT = coin_from_params(math.pi / 4, 0, 0)


def dense_walk_operator(coin: np.ndarray, nsites: int) -> np.ndarray:
    """S (I x C) on sites 1..nsites, basis index 2 (i - 1) + s, built
    literally from the shift rule: up stays, down moves one site right."""
    dim = 2 * nsites
    flip = np.kron(np.eye(nsites), coin)
    shift = np.zeros((dim, dim))
    for i in range(nsites):
        shift[2 * i, 2 * i] = 1
        if i + 1 < nsites:
            shift[2 * (i + 1) + 1, 2 * i + 1] = 1
    return shift @ flip


def test_identity_keeps_up():
    out = apply_step(WalkerState.localized((1, 0)), IDENTITY)
    assert out.origin == 1 and out.nsites == 1
    assert out.amp(1, 0) == 1


def test_identity_shifts_down():
    out = apply_step(WalkerState.localized((0, 1)), IDENTITY)
    assert out.origin == 2 and out.nsites == 1
    assert out.amp(2, 1) == 1


def test_rotation_step():
    out = apply_step(WalkerState.localized((1, 0)), ROT)
    assert out.amp(1, 0) == pytest.approx(R2)
    assert out.amp(2, 1) == pytest.approx(-R2)
    assert out.amp(1, 1) == 0 and out.amp(2, 0) == 0


def test_inverse_examples():
    back = apply_inverse_step(WalkerState.from_dict({(2, 1): 1}), IDENTITY)
    assert back.origin == 1 and back.amp(1, 1) == 1
    state = WalkerState.from_dict({(1, 0): R2, (2, 1): -R2})
    back = apply_inverse_step(state, ROT)
    assert back.nsites == 1 and back.amp(1, 0) == pytest.approx(1)
    assert abs(back.amp(1, 1)) < 1e-15


def test_inverse_rejects_leaky_state():
    with pytest.raises(NotReachableError) as err:
        apply_inverse_step(WalkerState(np.array([[0.6, 0.8], [0, 0]]), 1), IDENTITY)
    assert err.value.context["first_down"] == pytest.approx(0.8)


def test_two_step_example():
    out = run_walk((1, 0), [ROT, ROT])
    assert out.amp(1, 0) == pytest.approx(0.5)
    assert out.amp(2, 0) == pytest.approx(-0.5)
    assert out.amp(2, 1) == pytest.approx(-0.5)
    assert out.amp(3, 1) == pytest.approx(-0.5)


def test_run_walk_trivial():
    assert run_walk((1, 0), [IDENTITY]).amp(1, 0) == 1
    empty = run_walk((0.6, 0.8j), [])
    assert empty.nsites == 1 and empty.amp(1, 1) == 0.8j


def test_run_walk_requires_normalized_coin():
    with pytest.raises(DomainError):
        run_walk((1, 1), [IDENTITY])


@given(seeds)
def test_five_steps_span_six_sites(seed):
    rng = np.random.default_rng(seed)
    out = run_walk(random_pair(rng), random_coins(rng, 5))
    assert out.nsites == 6
    assert abs(out.amp(1, 1)) == 0 and abs(out.amp(6, 0)) == 0
    assert np.abs(reachability_residuals(out, 5)).max() < 1e-9


@given(seeds, st.integers(1, 6))
def test_matches_dense_oracle(seed, n):
    rng = np.random.default_rng(seed)
    init = random_pair(rng)
    coins = random_coins(rng, n)
    vec = np.zeros(2 * (n + 1), dtype=complex)
    vec[:2] = init
    for c in coins:
        vec = dense_walk_operator(c.matrix, n + 1) @ vec
    got = run_walk(init, coins).padded(1, n + 1)
    assert np.abs(got.reshape(-1) - vec).max() < 1e-10


@given(seeds, st.integers(1, 6))
def test_norm_conserved(seed, m):
    rng = np.random.default_rng(seed)
    s = WalkerState(random_amps(rng, (m, 2)), origin=1)
    out = apply_step(s, random_coins(rng, 1)[0])
    assert abs(out.norm() - s.norm()) < 1e-12 * max(1, s.norm())


@given(seeds)
def test_linearity(seed):
    rng = np.random.default_rng(seed)
    a, b = random_amps(rng, (4, 2)), random_amps(rng, (4, 2))
    x, y = random_amps(rng, 2)
    c = random_coins(rng, 1)[0].matrix
    lhs = step_amplitudes(x * a + y * b, c)
    rhs = x * step_amplitudes(a, c) + y * step_amplitudes(b, c)
    assert np.abs(lhs - rhs).max() < 1e-12


@given(seeds, st.integers(1, 5))
def test_inverse_contract(seed, m):
    rng = np.random.default_rng(seed)
    s = WalkerState(random_amps(rng, (m, 2)), origin=2).normalized()
    c = random_coins(rng, 1)[0]
    back = apply_inverse_step(apply_step(s, c), c)
    assert back.origin == s.origin
    assert np.abs(back.amps - s.amps).max() < 1e-10


def test_projection_examples():
    up = WalkerState.localized((1, 0))
    res = project_coin(up, (1, 0))
    assert res.probability == 1 and np.allclose(res.normalized_target, [1])
    res = project_coin(up, (0, 1))
    assert res.probability == 0 and res.normalized_target is None
    with pytest.raises(DomainError):
        project_coin(up, (0, 0))


@given(seeds, st.integers(1, 8))
def test_orthonormal_bras_sum_to_one(seed, n):
    rng = np.random.default_rng(seed)
    state = run_walk(random_pair(rng), random_coins(rng, n))
    a = random_pair(rng)
    b = np.array([-np.conj(a[1]), np.conj(a[0])])
    total = project_coin(state, a).probability + project_coin(state, b).probability
    assert total == pytest.approx(1, abs=1e-12)


def test_target_fidelity_alignment():
    state = WalkerState.from_dict({(2, 0): R2, (3, 0): R2})
    res = project_coin(state, (1, 0))
    assert target_fidelity(res, [R2, R2], origin=2) == pytest.approx(1)
    assert target_fidelity(res, [R2, R2], origin=1) == pytest.approx(0.25)

import math

import numpy as np
import pytest

from ssct.cgo import (CgoSolution, carleman_check, cgo_evaluate,
                      l2_xzeta_bound_gap, make_zeta_pair,
                      pair_invariant_errors, solve_remainder)
from ssct.geometry import BoxGrid, Field, gaussian_field
from ssct.harmonic import p_zeta
from ssct.potential import Potential

E1 = np.array([1.0, 0.0, 0.0])
E2 = np.array([0.0, 1.0, 0.0])
E3 = np.array([0.0, 0.0, 1.0])


def test_pair_hand_value():
    pair = make_zeta_pair(1.0, E1, 2.0, E3, E2)
    ref1 = np.array([0.0, 0.0, 2.0]) + 1j * np.array(
        [-0.5, math.sqrt(4.75), 0.0])
    assert np.max(np.abs(pair.zeta1 - ref1)) < 1e-12
    assert np.max(np.abs(pair.zeta1 + pair.zeta2 + 1j * E1)) < 1e-12


def test_pair_validation():
    with pytest.raises(ValueError):
        make_zeta_pair(1.0, E1, 2.0, 2.0 * E3, E2)
    with pytest.raises(ValueError):
        make_zeta_pair(1.0, E1, 2.0, E1, E2)
    with pytest.raises(ValueError):
        make_zeta_pair(1.0, 10.0 * E1, 2.0, E3, E2)
    with pytest.raises(ValueError):
        make_zeta_pair(1.0, np.zeros(2), 2.0, E3, E2)


def test_pair_invariants_random_draws():
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(200):
        a = rng.normal(size=3)
        a /= np.linalg.norm(a)
        b = rng.normal(size=3)
        b -= (a @ b) * a
        b /= np.linalg.norm(b)
        c = np.cross(a, b)
        kappa = rng.uniform(0.0, 10.0) * c
        tau = rng.uniform(6.0, 200.0)
        lam = rng.uniform(0.5, 30.0)
        pair = make_zeta_pair(lam, kappa, tau, a, b)
        worst = max(worst, *pair_invariant_errors(pair))
    assert worst < 1e-12


def test_pair_zero_kappa():
    pair = make_zeta_pair(4.0, np.zeros(3), 8.0, E3, E2)
    assert np.max(np.abs(pair.zeta1 + pair.zeta2)) < 1e-14
    e1, e2, e3 = pair_invariant_errors(pair)
    assert max(e1, e2, e3) < 1e-14


def test_remainder_zero_potential():
    grid = BoxGrid(3, 1.0, 16)
    pair = make_zeta_pair(1.0, np.zeros(3), 8.0, E3, E2)
    sol = solve_remainder(pair, 1, Potential(grid))
    assert sol.w.l2() == 0.0
    assert sol.residual == 0.0


def test_remainder_weak_single_mode():
    # for V = c cos(kappa0 . x) the first iterate is exact to O(c^2):
    # each exponential is divided by the conjugated symbol at its
    # frequency
    grid = BoxGrid(3, 1.0, 16)
    lam = 1.0
    pair = make_zeta_pair(lam, np.zeros(3), 8.0, E3, E2)
    c = 1e-3
    k0 = math.pi
    coords = grid.coords()
    v0 = Field(grid, c * np.cos(k0 * coords[0]))
    P = Potential(grid, v0=v0)
    sol = solve_remainder(pair, 1, P)
    p = p_zeta(grid, pair.zeta1) + lam
    plus = Field(grid, np.exp(1j * k0 * coords[0]))
    minus = Field(grid, np.exp(-1j * k0 * coords[0]))
    idx = int(np.argmin(np.abs(grid.freq_axis - k0)))
    jdx = int(np.argmin(np.abs(grid.freq_axis + k0)))
    ref = 0.5 * c * (plus.data / p[idx, 0, 0] + minus.data / p[jdx, 0, 0])
    assert np.max(np.abs(sol.w.data - ref)) < 10.0 * c ** 2


def test_remainder_norm_decays_in_tau():
    grid = BoxGrid(3, 1.0, 32)
    P = Potential(grid, v0=gaussian_field(grid, 5.0, width=0.25))
    norms = []
    for tau in (8.0, 16.0, 32.0):
        pair = make_zeta_pair(1.0, np.zeros(3), tau, E3, E2)
        sol = solve_remainder(pair, 1, P)
        norms.append(sol.w.l2())
    assert norms[1] <= 1.10 * norms[0]
    assert norms[2] <= 1.10 * norms[1]


def test_evaluate_pure_oscillation_unit_modulus():
    grid = BoxGrid(3, 1.0, 16)
    zeta = 1j * np.array([2.0, -1.0, 0.5])
    sol = CgoSolution(1, Field(grid), np.zeros(3), 1, 0.0, zeta)
    pair = make_zeta_pair(1.0, np.zeros(3), 8.0, E3, E2)
    pts = np.array([[0.3, -0.2, 0.1], [0.0, 0.5, -0.4]])
    vals = cgo_evaluate(sol, pair, pts)
    assert np.max(np.abs(np.abs(vals) - 1.0)) < 1e-12


def test_evaluate_overflow_guard():
    grid = BoxGrid(3, 1.0, 16)
    zeta = np.array([700.0, 0.0, 0.0], dtype=complex)
    sol = CgoSolution(1, Field(grid), np.zeros(3), 1, 0.0, zeta)
    pair = make_zeta_pair(1.0, np.zeros(3), 8.0, E3, E2)
    with pytest.raises(OverflowError):
        cgo_evaluate(sol, pair, np.array([[0.99, 0.0, 0.0]]))


def bandlimited_suite(grid, count, seed):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        hat = np.zeros(grid.shape, dtype=complex)
        for kx in range(-3, 4):
            for ky in range(-3, 4):
                for kz in range(-3, 4):
                    hat[kx % grid.n, ky % grid.n, kz % grid.n] = \
                        rng.normal() + 1j * rng.normal()
        out.append(Field.from_hat(grid, hat))
    return out


def test_carleman_ratios_bounded_in_tau():
    grid = BoxGrid(3, 1.0, 16)
    suite = bandlimited_suite(grid, 10, 1)
    maxima = []
    for tau in (16.0, 32.0):
        pair = make_zeta_pair(1.0, np.zeros(3), tau, E3, E2)
        rep = carleman_check(suite, pair.zeta1, 1.0, None)
        assert rep["count"] == 10
        assert math.isfinite(rep["max"])
        maxima.append(rep["max"])
    assert maxima[1] <= 1.5 * maxima[0]


def test_l2_xzeta_gap_nonnegative():
    grid = BoxGrid(3, 1.0, 16)
    suite = bandlimited_suite(grid, 5, 2)
    for tau in (8.0, 64.0):
        pair = make_zeta_pair(4.0, np.zeros(3), tau, E3, E2)
        for u in suite:
            assert l2_xzeta_bound_gap(u, pair.zeta1) >= 0.0

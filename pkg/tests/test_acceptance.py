"""End-to-end acceptance suite with pinned tolerances.

Each test pins the tolerance it must meet; helper routines shared with
the `verify` subcommand are reused so the CLI run and this suite
measure the same quantities.
"""

import math
import time

import numpy as np

from ssct.cli import load_config
from ssct.direct import solve_scattering, equation_residual
from ssct.geometry import BoxGrid, make_sphere
from ssct.layers import assemble_layers, jump_check
from ssct.verify import (_born_slope, _carleman, _cgo_decay,
                         _closed_form_check, _dual_path, _exterior_points,
                         _neumann_checks, _pair_invariants, _reciprocity,
                         _resolvent_checks, _resolvent_estimate_stability,
                         _runge_checks, _standard_potentials, _bernstein,
                         run_verification)

LAM = 4.0


def test_criterion_01_fundamental_solution_closed_form():
    t0 = time.monotonic()
    worst = _closed_form_check()
    elapsed = time.monotonic() - t0
    assert worst <= 1e-10
    assert elapsed < 1.0


def test_criterion_02_outgoing_resolvent():
    t0 = time.monotonic()
    residual, center_err = _resolvent_checks(64)
    elapsed = time.monotonic() - t0
    assert residual <= 1e-6
    assert center_err <= 1e-3
    assert elapsed < 30.0


def test_criterion_03_equation_residuals_at_64():
    grid = BoxGrid(3, 1.0, 64)
    y = np.array([0.6, 0.1, -0.2])
    for name, P in _standard_potentials(grid).items():
        state = solve_scattering(LAM, P, y)
        assert state.converged, name
        assert equation_residual(state, P) <= 1e-5, name


def test_criterion_03_weak_potential_born_slope():
    slope = _born_slope(LAM, BoxGrid(3, 1.0, 32), np.array([0.6, 0.1, -0.2]))
    assert abs(slope - 2.0) <= 0.3


def test_criterion_04_reciprocity_all_classes():
    grid = BoxGrid(3, 1.0, 64)
    rng = np.random.default_rng(12345)
    pts = _exterior_points(rng, 5)
    for name, P in _standard_potentials(grid).items():
        worst = _reciprocity(LAM, P, pts)
        assert worst <= 1e-3, (name, worst)


def test_criterion_05_jump_relations():
    errs = {}
    for res in (32, 64):
        surf = make_sphere(np.zeros(3), 1.0, res)
        ops = assemble_layers(LAM, None, surf)
        errs[res] = jump_check(ops, np.ones(surf.m, dtype=complex))
    assert errs[64] <= 5e-2
    assert math.log2(errs[32] / errs[64]) >= 1.0


def test_criterion_06_neumann_pipeline():
    err, flagged = _neumann_checks(32)
    assert err <= 1e-2
    assert flagged


def test_criterion_07_runge_approximation():
    errs, monotone, rep_err = _runge_checks((32, 48, 64))
    assert errs[-1] <= 5e-2
    assert monotone
    assert rep_err <= 1e-6
    # the finest cap holds well above 200 nodes
    surf = make_sphere(np.zeros(3), 1.0, 64)
    from ssct.geometry import CapSelector, select_patch
    idx = select_patch(surf, CapSelector(np.array([1.0, 0.0, 0.0]),
                                         math.radians(60)))
    assert len(idx) >= 200


def test_criterion_08_dual_path_alessandrini():
    worst, exact_zero = _dual_path(20, 12345)
    assert worst <= 1e-2
    assert exact_zero


def test_criterion_09_cgo_pair_invariants():
    assert _pair_invariants(1000, 12345) <= 1e-12


def test_criterion_10_cgo_decay_and_recovery():
    t0 = time.monotonic()
    nonincreasing, mode_err = _cgo_decay(64)
    elapsed = time.monotonic() - t0
    assert nonincreasing
    assert mode_err <= 0.1
    assert elapsed < 600.0


def test_criterion_11_norm_toolkit():
    bern_ok, _ = _bernstein(12345)
    assert bern_ok
    est_max, drift = _resolvent_estimate_stability(12345)
    assert math.isfinite(est_max)
    assert drift <= 0.2
    car_max, growth, min_gap = _carleman(100, 12345)
    assert math.isfinite(car_max)
    assert growth <= 1.5
    assert min_gap >= 0.0


def test_criterion_12_verify_subcommand_deterministic():
    cfg = load_config()
    rep1 = run_verification(cfg, quick=True)
    rep2 = run_verification(cfg, quick=True)
    assert rep1["all_pass"]
    assert rep1 == rep2

import cmath
import math

import numpy as np
import pytest

from ssct.geometry import (BoxGrid, CapSelector, gaussian_field, make_sphere,
                           select_patch)
from ssct.layers import (NearEigenvalueError, assemble_layers,
                         eval_single_layer, jump_check, neumann_solve,
                         runge_fit, surface_spacing)
from ssct.potential import Potential
from ssct.specfun import SIGMA, fundamental_solution

LAM = 4.0


def smooth_density(seed, surf):
    x = surf.nodes / np.linalg.norm(surf.nodes, axis=1)[:, None]
    rng = np.random.default_rng(seed)
    c = rng.normal(size=4) + 1j * rng.normal(size=4)
    return c[0] + c[1] * x[:, 0] + c[2] * x[:, 1] * x[:, 2] + c[3] * x[:, 2]


def point_source_data(lam, surf, z):
    d = surf.nodes - z
    r = np.linalg.norm(d, axis=1)
    dvals = np.array([fundamental_solution(lam, 3, ri).radial_derivative
                      for ri in r])
    return dvals * np.sum(surf.normals * d, axis=1) / r


def test_single_layer_weighted_symmetry():
    surf = make_sphere(np.zeros(3), 0.6, 24)
    ops = assemble_layers(LAM, None, surf)
    f = smooth_density(0, surf)
    g = smooth_density(1, surf)
    w = surf.weights
    lhs = np.sum(w * (ops.S_matrix @ f) * g)
    rhs = np.sum(w * f * (ops.S_matrix @ g))
    assert abs(lhs - rhs) < 1e-10 * max(abs(lhs), 1.0)


def test_single_layer_center_oracle():
    R = 0.5
    surf = make_sphere(np.zeros(3), R, 32)
    ops = assemble_layers(1.0, None, surf)
    val = eval_single_layer(ops, np.ones(surf.m), np.zeros((1, 3)))[0]
    oracle = SIGMA * R * cmath.exp(1j * R)
    assert abs(val - oracle) < 1e-3 * abs(oracle)


def test_eval_rejects_on_surface_points():
    surf = make_sphere(np.zeros(3), 0.5, 16)
    ops = assemble_layers(LAM, None, surf)
    with pytest.raises(ValueError):
        eval_single_layer(ops, np.ones(surf.m), surf.nodes[:1])


def test_jump_relation_converges():
    errs = []
    for res in (32, 64):
        surf = make_sphere(np.zeros(3), 0.75, res)
        ops = assemble_layers(LAM, None, surf)
        f = smooth_density(2, surf)
        f = f / np.max(np.abs(f))
        errs.append(jump_check(ops, f))
    assert errs[0] < 0.15
    assert errs[1] < 0.05
    order = math.log2(errs[0] / errs[1])
    assert order > 1.0


def test_jump_relation_constant_density():
    surf = make_sphere(np.zeros(3), 0.75, 48)
    ops = assemble_layers(LAM, None, surf)
    assert jump_check(ops, np.ones(surf.m, dtype=complex)) < 0.08


def test_surface_spacing_scale():
    surf = make_sphere(np.zeros(3), 1.0, 32)
    h = surface_spacing(surf)
    assert abs(h - math.sqrt(4.0 * math.pi / surf.m)) < 1e-12


def test_neumann_boundary_data_point_source():
    R = 0.75
    z = np.array([1.3, 0.2, -0.1])
    errs = []
    for res in (16, 32):
        surf = make_sphere(np.zeros(3), R, res)
        ops = assemble_layers(LAM, None, surf)
        g = point_source_data(LAM, surf, z)
        u, phi, diag = neumann_solve(LAM, None, surf, ops, boundary_data=g)
        assert u is None
        assert diag["condition_number"] < 50.0
        rng = np.random.default_rng(3)
        dirs = rng.normal(size=(50, 3))
        dirs /= np.linalg.norm(dirs, axis=1)[:, None]
        pts = 0.4 * R * dirs
        uh = eval_single_layer(ops, phi, pts)
        r = np.linalg.norm(pts - z, axis=1)
        ut = np.array([fundamental_solution(LAM, 3, ri).value for ri in r])
        errs.append(np.linalg.norm(uh - ut) / np.linalg.norm(ut))
    assert errs[1] < 0.02
    assert errs[1] < errs[0]


def test_neumann_near_eigenvalue_flag():
    R = 0.75
    lam_star = (3.342093657365695 / R) ** 2
    surf = make_sphere(np.zeros(3), R, 32)
    ops = assemble_layers(lam_star, None, surf)
    g = point_source_data(lam_star, surf, np.array([1.3, 0.2, -0.1]))
    with pytest.raises(NearEigenvalueError):
        neumann_solve(lam_star, None, surf, ops, boundary_data=g,
                      cond_limit=1e3)


def test_neumann_volume_path_matches_boundary_data():
    # with f_vol given, u = w - S phi has vanishing Neumann trace of
    # the correction; sanity: the returned field is finite and the
    # density solves the same boundary system as the extracted trace
    grid = BoxGrid(3, 1.0, 32)
    surf = make_sphere(np.zeros(3), 0.6, 16)
    ops = assemble_layers(LAM, None, surf)
    f_vol = gaussian_field(grid, 2.0, center=(0.1, 0.0, -0.1), width=0.2)
    u, phi, diag = neumann_solve(LAM, None, surf, ops, f_vol=f_vol, grid=grid)
    assert u is not None
    assert np.all(np.isfinite(u.data))
    assert np.all(np.isfinite(phi))


def test_runge_representable_target_exact():
    surf = make_sphere(np.zeros(3), 1.0, 32)
    ops = assemble_layers(LAM, None, surf)
    idx = select_patch(surf, CapSelector(np.array([1.0, 0.0, 0.0]),
                                         math.radians(60)))
    rng = np.random.default_rng(7)
    pts = rng.normal(size=(100, 3))
    pts /= np.linalg.norm(pts, axis=1)[:, None]
    pts *= 0.4 * rng.uniform(0.0, 1.0, 100)[:, None] ** (1.0 / 3.0)
    f0 = np.zeros(surf.m, dtype=complex)
    f0[idx] = 1.0 + 0.3j
    target = eval_single_layer(ops, f0, pts)
    _, err, details = runge_fit(ops, idx, target, pts, reg=0.0)
    assert err < 1e-10
    assert details["dof"] == len(idx)


def test_runge_error_improves_with_resolution():
    z = np.array([1.6, 0.3, 0.1])
    rng = np.random.default_rng(7)
    pts = rng.normal(size=(200, 3))
    pts /= np.linalg.norm(pts, axis=1)[:, None]
    pts *= 0.4 * rng.uniform(0.0, 1.0, 200)[:, None] ** (1.0 / 3.0)
    r = np.linalg.norm(pts - z, axis=1)
    target = np.array([fundamental_solution(LAM, 3, ri).value for ri in r])
    errs = []
    for res in (24, 48):
        surf = make_sphere(np.zeros(3), 1.0, res)
        ops = assemble_layers(LAM, None, surf)
        idx = select_patch(surf, CapSelector(np.array([1.0, 0.0, 0.0]),
                                             math.radians(60)))
        _, err, _ = runge_fit(ops, idx, target, pts)
        errs.append(err)
    assert errs[1] <= 1.05 * errs[0]
    assert errs[1] < 1e-2


def test_runge_empty_support_rejected():
    surf = make_sphere(np.zeros(3), 1.0, 16)
    ops = assemble_layers(LAM, None, surf)
    with pytest.raises(ValueError):
        runge_fit(ops, np.array([], dtype=int), np.zeros(4, dtype=complex),
                  np.zeros((4, 3)))


def test_assemble_requires_scatter_table_for_potential():
    grid = BoxGrid(3, 1.0, 16)
    P = Potential(grid, v0=gaussian_field(grid, 1.0, width=0.2))
    surf = make_sphere(np.zeros(3), 0.5, 16)
    with pytest.raises(ValueError):
        assemble_layers(LAM, P, surf)

import cmath
import math

import numpy as np
import pytest
import scipy.special

from ssct.specfun import (SIGMA, bessel_j, bessel_y, fundamental_solution,
                          fundamental_solution_grid, hankel1)


def test_hankel_half_integer_frozen_value():
    got = hankel1(0.5, math.pi)
    assert abs(got - 0.4501581580785j) < 1e-10


def test_hankel_half_integer_modulus_law():
    for z in (0.3, 1.0, 7.5, 40.0):
        got = hankel1(0.5, z)
        assert abs(abs(got) * math.sqrt(z) - math.sqrt(2.0 / math.pi)) < 1e-10


def test_j0_frozen_value():
    got = bessel_j(0, 1.0)
    assert abs(got - 0.7651976866) < 1e-9
    got_y = bessel_y(0, 1.0)
    assert abs(got_y - 0.0882569642) < 1e-9


@pytest.mark.parametrize("order", [0.0, 0.5, 1.0, 1.5])
def test_hankel_matches_reference_library(order):
    zs = np.geomspace(1e-3, 1e3, 120)
    worst = 0.0
    for z in zs:
        got = hankel1(order, float(z))
        ref = complex(scipy.special.hankel1(order, z))
        worst = max(worst, abs(got - ref) / abs(ref))
    assert worst < 1e-10


def test_wronskian_identity():
    # J_{n+1} Y_n - J_n Y_{n+1} = 2 / (pi z)
    for z in (0.5, 2.0, 11.0, 25.0):
        lhs = bessel_j(1, z) * bessel_y(0, z) - bessel_j(0, z) * bessel_y(1, z)
        assert abs(lhs - 2.0 / (math.pi * z)) < 1e-10


def test_fundamental_solution_3d_closed_form():
    val = fundamental_solution(1.0, 3, 1.0).value
    ref = SIGMA * cmath.exp(1j) / (4.0 * math.pi)
    assert abs(val - ref) < 1e-12
    # four-digit fingerprint of the closed form
    assert abs(ref - SIGMA * (0.0430 + 0.0670j)) < 1e-4


def test_fundamental_solution_3d_modulus_and_phase():
    for r in (0.05, 0.5, 3.0):
        val = fundamental_solution(1.0, 3, r).value
        assert abs(abs(val) - 1.0 / (4.0 * math.pi * r)) < 1e-12
    val = fundamental_solution(4.0, 3, 0.5).value
    assert abs(cmath.phase(val / SIGMA) - 1.0) < 1e-12


def test_fundamental_solution_radiating_phase_direction():
    # outgoing convention: phase advances with r at speed sqrt(lam)
    lam = 4.0
    r1, r2 = 1.0, 1.001
    p1 = cmath.phase(fundamental_solution(lam, 3, r1).value / SIGMA)
    p2 = cmath.phase(fundamental_solution(lam, 3, r2).value / SIGMA)
    assert p2 > p1


def test_fundamental_solution_grid_masks_origin():
    radii = np.array([[0.0, 1.0], [2.0, 0.0]])
    vals = fundamental_solution_grid(1.0, 3, radii)
    assert vals[0, 0] == 0.0 and vals[1, 1] == 0.0
    assert vals[0, 1] != 0.0


def test_fundamental_solution_2d_matches_reference():
    lam = 4.0
    for r in (0.1, 1.0, 5.0):
        val = fundamental_solution(lam, 2, r).value
        ref = SIGMA * 0.25j * complex(
            scipy.special.hankel1(0, math.sqrt(lam) * r))
        assert abs(val - ref) < 1e-10 * abs(ref)

"""Bessel/Hankel evaluation and the radiating fundamental solution.

Hand-rolled cylinder functions for the handful of orders needed in
dimensions two and three: ascending series below z = 12, Hankel
asymptotic expansion above, and closed forms for half-integer orders.
"""

import math
from dataclasses import dataclass

import numpy as np

EULER_GAMMA = 0.57721566490153286060651209008240243

# Ascending series loses accuracy past this point; the asymptotic
# expansion's best-truncation error drops below 1e-10 here.
_SERIES_CUTOFF = 12.0

SUPPORTED_ORDERS = (0.0, 0.5, 1.0, 1.5)

# Sign sigma of the fundamental solution relative to e^{ikr}/(4 pi r):
# we solve (Delta + lambda) Phi = +delta_0, hence sigma = -1.
SIGMA = -1.0


def _j0_y0_series(z):
    """J_0 and Y_0 by the ascending series, z < 12."""
    q = 0.25 * z * z
    term = 1.0
    j0 = 1.0
    ysum = 0.0  # sum (-1)^{k+1} H_k (z/2)^{2k} / (k!)^2
    hk = 0.0
    k = 1
    while True:
        term *= -q / (k * k)
        hk += 1.0 / k
        j0 += term
        ysum -= term * hk
        if abs(term) * (hk + 1.0) < 1e-18 * (abs(j0) + 1.0):
            break
        k += 1
        if k > 200:
            break
    y0 = (2.0 / math.pi) * ((math.log(0.5 * z) + EULER_GAMMA) * j0 + ysum)
    return j0, y0


def _j1_y1_series(z):
    """J_1 and Y_1 by the ascending series, z < 12."""
    x = 0.5 * z
    q = x * x
    term = x  # (z/2)^{2k+1} / (k! (k+1)!) at k=0
    j1 = term
    hsum = term * 1.0  # sum (-1)^k (H_k + H_{k+1}) (z/2)^{2k+1}/(k!(k+1)!)
    hk = 0.0
    hk1 = 1.0
    k = 1
    while True:
        term *= -q / (k * (k + 1))
        hk += 1.0 / k
        hk1 += 1.0 / (k + 1)
        j1 += term
        hsum += term * (hk + hk1)
        if abs(term) * (hk + hk1 + 1.0) < 1e-18 * (abs(j1) + 1.0):
            break
        k += 1
        if k > 200:
            break
    y1 = ((2.0 / math.pi) * (math.log(0.5 * z) + EULER_GAMMA) * j1
          - 2.0 / (math.pi * z) - hsum / math.pi)
    return j1, y1


def _hankel_asymptotic(nu, z):
    """H^(1)_nu(z) by the Hankel asymptotic expansion, z >= 12.

    Truncated at the smallest term; best-truncation error is below
    1e-10 relative for nu <= 3/2 and z >= 12.
    """
    mu = 4.0 * nu * nu
    s = complex(1.0, 0.0)
    term = complex(1.0, 0.0)
    prev = abs(term)
    k = 0
    while True:
        k += 1
        factor = (mu - (2 * k - 1) ** 2) / (8.0 * k * z)
        term = term * factor * 1j
        if abs(term) >= prev:
            break
        s += term
        prev = abs(term)
        if prev < 1e-18:
            break
        if k > 60:
            break
    phase = z - 0.5 * nu * math.pi - 0.25 * math.pi
    return math.sqrt(2.0 / (math.pi * z)) * complex(math.cos(phase), math.sin(phase)) * s


def hankel1(order, z):
    """Hankel function of the first kind H^(1)_order(z) for z > 0.

    Supported orders: 0, 1/2, 1, 3/2 (the values d/2 - 1 for d in
    {2, 3} plus one derivative recurrence step).
    """
    if z <= 0.0:
        raise ValueError("hankel1 requires z > 0, got %r" % (z,))
    order = float(order)
    if order not in SUPPORTED_ORDERS:
        raise ValueError("unsupported order %r" % (order,))
    if order == 0.5:
        # h_0 spherical closed form
        return -1j * math.sqrt(2.0 / (math.pi * z)) * complex(math.cos(z), math.sin(z))
    if order == 1.5:
        # h_1 spherical closed form
        return (-math.sqrt(2.0 / (math.pi * z))
                * complex(math.cos(z), math.sin(z)) * (1.0 + 1j / z))
    if z >= _SERIES_CUTOFF:
        return _hankel_asymptotic(order, z)
    if order == 0.0:
        j, y = _j0_y0_series(z)
    else:
        j, y = _j1_y1_series(z)
    return complex(j, y)


def bessel_j(order, z):
    """J_order(z) for order in {0, 1} and z > 0."""
    if z <= 0.0:
        raise ValueError("bessel_j requires z > 0")
    order = float(order)
    if order not in (0.0, 1.0):
        raise ValueError("unsupported order %r" % (order,))
    if z >= _SERIES_CUTOFF:
        return _hankel_asymptotic(order, z).real
    return (_j0_y0_series(z) if order == 0.0 else _j1_y1_series(z))[0]


def bessel_y(order, z):
    """Y_order(z) for order in {0, 1} and z > 0."""
    if z <= 0.0:
        raise ValueError("bessel_y requires z > 0")
    order = float(order)
    if order not in (0.0, 1.0):
        raise ValueError("unsupported order %r" % (order,))
    if z >= _SERIES_CUTOFF:
        return _hankel_asymptotic(order, z).imag
    return (_j0_y0_series(z) if order == 0.0 else _j1_y1_series(z))[1]


@dataclass(frozen=True)
class KernelEval:
    """Fundamental-solution sample at one radius.

    value            Phi_lambda(r)
    radial_derivative  d Phi_lambda / dr
    regular_factor   value * r^(d-2): the bounded factor multiplying
                     the weak singularity |x-y|^(2-d)
    """
    value: complex
    radial_derivative: complex
    regular_factor: complex


def fundamental_solution(lam, d, r):
    """Outgoing fundamental solution Phi_lambda at radius r.

    Normalized so (Delta + lambda) Phi_lambda = delta_0; in d=3 this is
    -e^{i sqrt(lambda) r} / (4 pi r).
    """
    if r <= 0.0:
        raise ValueError("fundamental_solution requires r > 0")
    if lam <= 0.0:
        raise ValueError("fundamental_solution requires lambda > 0")
    if d == 3:
        k = math.sqrt(lam)
        phase = complex(math.cos(k * r), math.sin(k * r))
        value = SIGMA * phase / (4.0 * math.pi * r)
        dvalue = SIGMA * phase * (1j * k * r - 1.0) / (4.0 * math.pi * r * r)
        return KernelEval(value, dvalue, value * r)
    if d == 2:
        k = math.sqrt(lam)
        value = SIGMA * 0.25j * hankel1(0, k * r)
        # H0' = -H1
        dvalue = -SIGMA * 0.25j * k * hankel1(1, k * r)
        return KernelEval(value, dvalue, value)
    raise ValueError("dimension must be 2 or 3")


def fundamental_solution_grid(lam, d, radii):
    """Vectorized Phi_lambda values over an array of radii.

    Zero radius entries map to 0: the removed singularity is integrable
    for d <= 3 and the resolvent residual oracle quantifies the error.
    """
    radii = np.asarray(radii, dtype=float)
    out = np.zeros(radii.shape, dtype=complex)
    mask = radii > 0.0
    r = radii[mask]
    k = math.sqrt(lam)
    if d == 3:
        out[mask] = SIGMA * np.exp(1j * k * r) / (4.0 * math.pi * r)
    elif d == 2:
        vals = np.array([SIGMA * 0.25j * hankel1(0, k * ri) for ri in r])
        out[mask] = vals
    else:
        raise ValueError("dimension must be 2 or 3")
    return out

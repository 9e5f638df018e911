"""Complex geometric optics machinery.

zeta-pair construction, the conjugated symbol p_zeta, the remainder
fixed point w <- G_zeta(V (1 + w)) realized by Fourier division, and
the Carleman-inequality desk check. Solutions are stored as (zeta, w);
the exponential e^{zeta.x} only ever appears through a center-normalized
evaluator with a hard overflow guard.
"""

import math
from dataclasses import dataclass, field as dc_field
from typing import List

import numpy as np

from .geometry import Field
from .harmonic import norm_Xzeta, p_zeta
from .potential import trace_at

OVERFLOW_EXPONENT = 600.0


@dataclass
class CgoPair:
    lam: float
    kappa: np.ndarray
    tau: float
    theta: np.ndarray
    eta: np.ndarray
    zeta1: np.ndarray
    zeta2: np.ndarray


def make_zeta_pair(lam, kappa, tau, theta, eta):
    """The two CGO directions with zeta.zeta = -lambda, zeta1+zeta2 = -i kappa.

    Requires (theta, eta, kappa/|kappa|) pairwise orthogonal unit
    vectors (kappa may be zero) and tau^2 + lambda - |kappa|^2/4 >= 0.
    """
    kappa = np.asarray(kappa, dtype=float)
    theta = np.asarray(theta, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if kappa.shape != (3,) or theta.shape != (3,):
        raise ValueError("CGO construction is three-dimensional")
    for v, name in ((theta, "theta"), (eta, "eta")):
        if abs(np.linalg.norm(v) - 1.0) > 1e-12:
            raise ValueError("%s must be a unit vector" % name)
    if abs(theta @ eta) > 1e-12 or abs(theta @ kappa) > 1e-12 \
            or abs(eta @ kappa) > 1e-12:
        raise ValueError("theta, eta, kappa must be pairwise orthogonal")
    radicand = tau * tau + lam - 0.25 * float(kappa @ kappa)
    if radicand < 0:
        raise ValueError("tau too small for this kappa: negative radicand")
    root = math.sqrt(radicand)
    zeta1 = tau * theta + 1j * (-0.5 * kappa + root * eta)
    zeta2 = -tau * theta + 1j * (-0.5 * kappa - root * eta)
    return CgoPair(float(lam), kappa, float(tau), theta, eta, zeta1, zeta2)


def pair_invariant_errors(pair):
    """Relative deviations of the three algebraic constraints.

    Scaled by the magnitude of the quantities entering each identity;
    the raw residuals grow like eps * tau^2 through no fault of the
    construction.
    """
    s1 = max(1.0, float(np.sum(np.abs(pair.zeta1) ** 2)))
    s2 = max(1.0, float(np.sum(np.abs(pair.zeta2) ** 2)))
    s3 = max(1.0, float(np.max(np.abs(pair.zeta1))),
             float(np.max(np.abs(pair.kappa))))
    e1 = abs(complex(pair.zeta1 @ pair.zeta1) + pair.lam) / s1
    e2 = abs(complex(pair.zeta2 @ pair.zeta2) + pair.lam) / s2
    e3 = float(np.max(np.abs(pair.zeta1 + pair.zeta2 + 1j * pair.kappa))) / s3
    return e1, e2, e3


@dataclass
class CgoSolution:
    pair_index: int
    w: Field
    center: np.ndarray
    iterations: int
    residual: float
    zeta: np.ndarray = None
    residual_history: List[float] = dc_field(default_factory=list)


def _conjugated_inverse(grid, zeta, lam, M):
    """Inverse symbol of Delta + 2 zeta.grad on the lattice.

    The operator symbol is p_zeta(xi) + lam = -|xi|^2 + 2i zeta.xi
    (the zeta.zeta = -lam term belongs to the conjugated Helmholtz
    operator, not to the remainder equation). Its zero set is a
    codimension-two circle through xi = 0; lattice points on or near
    it are projected out instead of divided, which matches the
    principal-value cancellation of the cell-averaged inverse there.
    """
    floor = 1e-8 * M * float(np.sum(np.asarray(zeta).real ** 2))
    p = p_zeta(grid, zeta) + lam
    small = np.abs(p) < floor
    inv = np.zeros(grid.shape, dtype=complex)
    inv[~small] = 1.0 / p[~small]
    return inv


def solve_remainder(pair, which, P, tol=1e-10, max_iter=400, M=4.0):
    """Fixed point for (Delta + 2 zeta.grad - V) w = V on the periodic box.

    Each step divides by the conjugated-Laplacian symbol in Fourier
    space; the potential acts through apply_as_source with the CGO
    trace on any shell part.
    """
    grid = P.grid
    zeta = pair.zeta1 if which == 1 else pair.zeta2
    inv_p = _conjugated_inverse(grid, zeta, pair.lam, M)

    def apply_Gzeta(src_field):
        return Field.from_hat(grid, inv_p * src_field.hat())

    def v_times(u):
        """V (1 + u) assembled on the grid (shell part gridded by quadrature)."""
        one_plus = Field(grid, 1.0 + u.data)
        bundle = P.apply_as_source(one_plus)
        total = Field(grid)
        if bundle.grid_part is not None:
            total = total + bundle.grid_part
        if bundle.surface is not None:
            total = total + _grid_shell_source(grid, bundle)
        return total

    w = Field(grid)
    history = []
    if P.is_zero:
        return CgoSolution(which, w, np.zeros(3), 1, 0.0, zeta, [0.0])
    scale = None
    for it in range(1, max_iter + 1):
        nxt = apply_Gzeta(v_times(w))
        upd = (nxt - w).l2()
        if scale is None:
            scale = max(nxt.l2(), 1e-300)
        history.append(upd / scale)
        w = nxt
        if history[-1] < tol:
            res = (w - apply_Gzeta(v_times(w))).l2() / scale
            return CgoSolution(which, w, np.zeros(3), it, res, zeta, history)
        if it >= 6 and history[-1] > history[-4]:
            raise RuntimeError("remainder iteration diverging: tau below the "
                               "operational threshold for this potential")
    raise RuntimeError("remainder iteration did not converge: %r" % history[-3:])


def _grid_shell_source(grid, bundle):
    """Spread a weighted shell density onto the grid as a source term.

    Each node becomes w_i value_i / h^d at its nearest grid point: the
    simplest quadrature-consistent gridding of alpha u dsigma.
    """
    data = np.zeros(grid.shape, dtype=complex)
    idx = np.rint((bundle.surface.nodes + grid.L) / grid.h).astype(int) % grid.n
    vals = bundle.surface.weights * bundle.surface_values / grid.cell_volume
    for ii, v in zip(idx, vals):
        data[tuple(ii)] += v
    return Field(grid, data)


def cgo_evaluate(sol, pair, points, center=None):
    """v(x) = e^{zeta.(x - center)} (1 + w(x)) at points inside the box.

    Center normalization keeps magnitudes representable; a hard guard
    refuses exponents beyond 600.
    """
    zeta = sol.zeta if sol.zeta is not None else (
        pair.zeta1 if sol.pair_index == 1 else pair.zeta2)
    if center is None:
        center = sol.center
    points = np.atleast_2d(np.asarray(points, dtype=float))
    rel = points - np.asarray(center)[None, :]
    expo = rel @ zeta
    if float(np.max(np.abs(expo.real))) > OVERFLOW_EXPONENT:
        raise OverflowError("CGO exponential beyond the overflow guard")
    wvals = trace_at(sol.w, points)
    return np.exp(expo) * (1.0 + wvals)


def carleman_check(u_suite, zeta, lam, P, M=4.0, R0=1.0):
    """Empirical constants of the weighted a-priori inequality.

    For each u: L = ||u||_{X^{1/2}_{-zeta}}, R = ||e^{phi}(Delta + lambda - V)
    (e^{-phi} u)||_{X^{-1/2}_{-zeta}} with phi(x) = M (x.theta)^2/2 + x.zeta;
    returns statistics of L / (R0 R). The conjugated operator is applied
    in expanded form

        Delta u - 2 grad(phi).grad(u) + (|grad phi|^2 - Delta phi) u
        + lam u - V u,

    because the weight e^{x.zeta} is not box-periodic and conjugating
    numerically would drown the result in amplified wrap-around error.
    The expanded coefficients are polynomials, so nothing overflows.
    """
    ratios = []
    zeta = np.asarray(zeta, dtype=complex)
    re = zeta.real
    nrm = np.linalg.norm(re)
    theta = re / nrm if nrm > 0 else np.array([0.0, 0.0, 1.0])
    for u in u_suite:
        grid = u.grid
        coords = grid.coords()
        xdott = sum(c * t for c, t in zip(coords, theta))
        # grad(phi) = M (x.theta) theta + zeta, Delta(phi) = M
        from .direct import gradient, laplacian
        gradu = gradient(u)
        gdotgu = sum((M * xdott * t + z) * gu.data
                     for t, z, gu in zip(theta, zeta, gradu))
        gp2 = ((M * xdott) ** 2 + 2.0 * M * xdott * (theta @ zeta)
               + zeta @ zeta)
        out = (laplacian(u).data - 2.0 * gdotgu
               + (gp2 - M + lam) * u.data)
        if P is not None and not P.is_zero:
            out = out - P.grid_multiplier().data * u.data
        weighted = Field(grid, out)
        L = norm_Xzeta(u, -zeta, 0.5, M)
        R = norm_Xzeta(weighted, -zeta, -0.5, M)
        if R > 0:
            ratios.append(L / (R0 * R))
    ratios = np.array(ratios)
    return {"max": float(np.max(ratios)), "median": float(np.median(ratios)),
            "count": len(ratios)}


def l2_xzeta_bound_gap(u, zeta, M=4.0):
    """||u||_2 vs M^{-1/4} |Re zeta|^{-1/2} ||u||_{X^{1/2}}: returns the
    slack (bound minus norm), nonnegative by pointwise multiplier
    comparison."""
    re = np.asarray(zeta).real
    re_norm = math.sqrt(float(np.sum(re * re)))
    bound = M ** -0.25 * re_norm ** -0.5 * norm_Xzeta(u, zeta, 0.5, M)
    return bound - u.l2()

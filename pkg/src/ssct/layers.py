"""Layer potentials on the total wave, jump relations, the Neumann
solver, and the Runge fitting engine.

Matrices split as free + scattered: the free part uses the radiating
kernel with a polar singular-diagonal rule, the scattered part is a
smooth kernel table handled by plain quadrature. The kernel carries
the package sign convention sigma; identities stated for the classical
kernel (jump = density, (K*+I)phi = 2g) pick up explicit sigma factors
where they appear below.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import Field, Hypersurface
from .harmonic import free_resolvent
from .potential import Potential, trace_at
from .specfun import SIGMA


def _pair_geometry(x_nodes, y_nodes):
    diff = x_nodes[:, None, :] - y_nodes[None, :, :]
    r = np.sqrt(np.sum(diff ** 2, axis=2))
    return diff, r


def free_kernel(lam, r):
    """Phi_lambda(|x-y|) with the package sign; r = 0 entries unused."""
    k = math.sqrt(lam)
    safe = np.where(r > 0, r, 1.0)
    return SIGMA * np.exp(1j * k * safe) / (4.0 * math.pi * safe)


def free_kernel_gradient(lam, diff, r):
    """grad_x Phi_lambda(x - y): Phi'(r) (x-y)/r."""
    k = math.sqrt(lam)
    safe = np.where(r > 0, r, 1.0)
    dphi = SIGMA * np.exp(1j * k * safe) * (1j * k * safe - 1.0) / (4.0 * math.pi * safe ** 2)
    return dphi[..., None] * diff / safe[..., None]


@dataclass
class LayerOperatorSet:
    S_matrix: np.ndarray
    N_matrix: np.ndarray   # partial_{nu_x} kernel, principal value on the diagonal
    D_matrix: np.ndarray   # partial_{nu_y} kernel
    surface: Hypersurface
    lam: float
    potential_id: str
    potential: Optional[Potential] = None
    scatter_table: Optional[dict] = None


def compute_scatter_table(lam, P, boundary, tol=1e-8):
    """u_sc(x_i, y_j) and its x-gradient at the boundary nodes.

    One direct solve per boundary node y_j; only affordable at desk
    sizes, cache upstream if reused.
    """
    from .direct import solve_scattering, gradient
    m = boundary.m
    u = np.zeros((m, m), dtype=complex)
    dn_x = np.zeros((m, m), dtype=complex)
    for j in range(m):
        state = solve_scattering(lam, P, boundary.nodes[j], tol=tol)
        vals = trace_at(state.grid_field, boundary.nodes)
        u[:, j] = vals
        grads = gradient(state.grid_field)
        gv = np.stack([trace_at(g, boundary.nodes) for g in grads], axis=1)
        dn_x[:, j] = np.sum(gv * boundary.normals, axis=1)
    return {"u": u, "dn_x": dn_x}


def assemble_layers(lam, P, boundary, scatter_table=None):
    """Dense S, N, D operators on the boundary mesh.

    Off-diagonal entries are kernel times quadrature weight; diagonals
    use the polar correction for the weak |x-y|^(2-d) singularity. The
    normal-derivative diagonals need the surface curvature, available
    in closed form for the sphere/circle meshes this package builds.
    """
    if P is not None and not P.is_zero and scatter_table is None:
        raise ValueError("a scatter table is required when V is nonzero")
    nodes = boundary.nodes
    w = boundary.weights
    diff, r = _pair_geometry(nodes, nodes)
    m = boundary.m
    eye = np.eye(m, dtype=bool)
    S = free_kernel(lam, r) * w[None, :]
    S[eye] = 0.0
    # polar rule: int over an equal-area disk of F(x,x) |x-y|^(2-d)
    d = boundary.d
    if d == 3:
        diag_free = SIGMA / (4.0 * math.pi) * 2.0 * np.sqrt(math.pi * w)
    else:
        # 2-D kernel is log-singular; the flat-panel closed form
        # int_{-a}^{a} -(1/2pi) log|t| dt with 2a = w
        a = 0.5 * w
        diag_free = SIGMA * (-1.0 / (2.0 * math.pi)) * 2.0 * a * (np.log(a) - 1.0)
    S[eye] = diag_free

    grad = free_kernel_gradient(lam, diff, r)
    Nmat = np.sum(grad * boundary.normals[:, None, :], axis=2) * w[None, :]
    Dmat = -np.sum(grad * boundary.normals[None, :, :], axis=2) * w[None, :]
    Nmat[eye] = 0.0
    Dmat[eye] = 0.0
    R = boundary.meta.get("radius")
    if R is not None:
        if d == 3:
            # on a sphere nu.(x-y) = |x-y|^2/(2R): bounded factor -sigma/(8 pi R)
            diag_n = -SIGMA / (8.0 * math.pi * R) * 2.0 * np.sqrt(math.pi * w)
        else:
            diag_n = -SIGMA / (4.0 * math.pi * R) * w
        Nmat[eye] = diag_n
        Dmat[eye] = diag_n
    pid = "free" if (P is None or P.is_zero) else P.content_hash()
    if scatter_table is not None:
        S = S + scatter_table["u"] * w[None, :]
        Nmat = Nmat + scatter_table["dn_x"] * w[None, :]
        Dmat = Dmat + scatter_table["dn_x"].T * w[None, :]
    return LayerOperatorSet(S, Nmat, Dmat, boundary, lam, pid, P, scatter_table)


def eval_single_layer(ops, f, points, with_gradient=False):
    """Single layer S f at off-surface points by direct quadrature.

    Covers the free kernel; when the operator set carries a potential,
    the smooth scattered part must be added by the caller from a field
    solve (see single_layer_field).
    """
    f = np.asarray(f, dtype=complex)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    surface = ops.surface
    diff, r = _pair_geometry(points, surface.nodes)
    if np.min(r) < 1e-12:
        raise ValueError("evaluation points must lie off the surface")
    coef = surface.weights * f
    vals = free_kernel(ops.lam, r) @ coef
    if not with_gradient:
        return vals
    grad = free_kernel_gradient(ops.lam, diff, r)
    gvals = np.einsum("pqd,q->pd", grad, coef)
    return vals, gvals


def single_layer_field(lam, P, surface, f, grid, tol=1e-8):
    """Total-wave single layer S f as a grid field.

    By linearity, S f equals the free layer of f plus the scattered
    wave generated when that free layer is taken as incident field;
    one solve per density instead of one per node.
    """
    from .harmonic import resolvent_apply_surface
    f = np.asarray(f, dtype=complex)
    u_free = Field(grid, resolvent_apply_surface(lam, grid, surface, f))
    if P is None or P.is_zero:
        return u_free
    # scattered part: u_sc = G(V(u_free + u_sc))
    def apply_GV(u):
        return free_resolvent(lam, P.apply_as_source(u), grid)
    rhs = apply_GV(u_free)
    scale = max(rhs.l2(), 1e-300)
    u = rhs.copy()
    for it in range(200):
        nxt = rhs + apply_GV(u)
        upd = (nxt - u).l2() / scale
        u = nxt
        if upd < tol:
            break
    else:
        raise RuntimeError("single_layer_field iteration did not converge")
    return u_free + u


def surface_spacing(surface):
    """Characteristic node spacing, sqrt of the mean quadrature weight."""
    return math.sqrt(float(np.mean(surface.weights)))


def normal_derivative_offset(ops, f, side, offsets=None):
    """One-sided normal derivative of S f by offset evaluation + Richardson.

    side=+1 evaluates outside, side=-1 inside; first-order Richardson
    from the two offsets 2h and 4h (h = surface spacing).
    """
    surface = ops.surface
    if offsets is None:
        # 1.5x the node spacing keeps the quadrature in its convergent
        # regime while the Richardson step removes the linear t term
        h = surface_spacing(surface)
        offsets = (1.5 * h, 3.0 * h)
    t1, t2 = offsets
    vals = []
    for t in (t1, t2):
        pts = surface.nodes + side * t * surface.normals
        _, gvals = eval_single_layer(ops, f, pts, with_gradient=True)
        vals.append(np.sum(gvals * surface.normals, axis=1))
    # v(t) = v0 + c t  =>  v0 = (t2 v(t1) - t1 v(t2)) / (t2 - t1)
    return (t2 * vals[0] - t1 * vals[1]) / (t2 - t1)


def jump_check(ops, f):
    """Max deviation of the one-sided normal-derivative jump from the density.

    The classical identity is d_nu S_inner - d_nu S_outer = f; with the
    package kernel sign it reads sigma (inner - outer) = f.
    """
    f = np.asarray(f, dtype=complex)
    inner = normal_derivative_offset(ops, f, side=-1)
    outer = normal_derivative_offset(ops, f, side=+1)
    return float(np.max(np.abs(SIGMA * (inner - outer) - f)))


class NearEigenvalueError(RuntimeError):
    def __init__(self, cond):
        super().__init__("boundary system condition number %.3e suggests "
                         "lambda is near a Neumann eigenvalue; perturb lambda"
                         % cond)
        self.cond = cond


def neumann_solve(lam, P, boundary, ops, f_vol=None, boundary_data=None,
                  grid=None, cond_limit=1e8, tol=1e-8):
    """Interior Neumann problem via the layer-potential construction.

    Two-step: outgoing global solve w of (Delta+lambda-V) w = f_vol,
    then a correction v = S phi with (K* + I) phi = 2 sigma g,
    K* = 2 sigma N, killing the Neumann trace g = d_nu w. Passing
    boundary_data g directly (f_vol = None) solves the homogeneous
    interior problem with d_nu u = g instead.

    Returns (u_field_or_None, phi, diagnostics).
    """
    from .direct import gradient
    w_field = None
    if f_vol is not None:
        if grid is None:
            grid = f_vol.grid
        w_field = _outgoing_solve(lam, P, f_vol, grid, tol)
        grads = gradient(w_field)
        gv = np.stack([trace_at(g, boundary.nodes) for g in grads], axis=1)
        g = np.sum(gv * boundary.normals, axis=1)
    elif boundary_data is not None:
        g = np.asarray(boundary_data, dtype=complex)
    else:
        raise ValueError("provide f_vol or boundary_data")
    m = boundary.m
    Kstar = 2.0 * SIGMA * ops.N_matrix
    A = Kstar + np.eye(m)
    cond = np.linalg.cond(A)
    if cond > cond_limit:
        raise NearEigenvalueError(cond)
    phi = np.linalg.solve(A, 2.0 * SIGMA * g)
    diagnostics = {"condition_number": float(cond)}
    if f_vol is not None:
        v = single_layer_field(lam, P, boundary, phi, grid, tol)
        u = w_field - v
        return u, phi, diagnostics
    return None, phi, diagnostics


def _outgoing_solve(lam, P, f_vol, grid, tol):
    """Outgoing solve of (Delta + lambda - V) w = f_vol."""
    from .harmonic import resolvent_apply_grid
    w = Field(grid, resolvent_apply_grid(lam, f_vol.data, grid))
    if P is None or P.is_zero:
        return w
    def apply_GV(u):
        return free_resolvent(lam, P.apply_as_source(u), grid)
    rhs = w
    scale = max(rhs.l2(), 1e-300)
    u = rhs.copy()
    for _ in range(200):
        nxt = rhs + apply_GV(u)
        upd = (nxt - u).l2() / scale
        u = nxt
        if upd < tol:
            return u
    raise RuntimeError("outgoing volume solve did not converge")


def evaluate_neumann_solution(ops, phi, points, w_field=None):
    """u = w - S phi at interior points (w = 0 for the boundary-data path).

    For the boundary-data path the solution is u = S phi itself with
    the opposite sign convention folded in: u = sigma-free construction
    returns S phi directly.
    """
    vals = eval_single_layer(ops, phi, points)
    if w_field is not None:
        vals = trace_at(w_field, points) - vals
    return vals


def runge_fit(ops, sigma_idx, target_values, eval_points, reg=None):
    """Tikhonov least squares for a cap-supported density matching a target.

    Minimizes ||S f - target||^2_{L2(Omega')} + reg ||f||^2_{L2(Sigma)}
    over densities supported on the node subset sigma_idx; eval_points
    sample Omega' with equal weights. Returns (full-surface density,
    relative L2 error, details).
    """
    surface = ops.surface
    sigma_idx = np.asarray(sigma_idx, dtype=int)
    if len(sigma_idx) == 0:
        raise ValueError("empty density support")
    pts = np.atleast_2d(np.asarray(eval_points, dtype=float))
    target = np.asarray(target_values, dtype=complex)
    sub_nodes = surface.nodes[sigma_idx]
    w_sub = surface.weights[sigma_idx]
    diff, r = _pair_geometry(pts, sub_nodes)
    A = free_kernel(ops.lam, r) * w_sub[None, :]
    # normal-equations scale for the default regularization
    gram_diag_scale = np.linalg.norm(A, ord=2) ** 2
    if reg is None:
        reg = 1e-8 * gram_diag_scale
    # weighted Tikhonov: augment with sqrt(reg * w_i) rows
    aug = np.concatenate([A, np.diag(np.sqrt(reg * w_sub))], axis=0)
    rhs = np.concatenate([target, np.zeros(len(sigma_idx), dtype=complex)])
    coef, *_ = np.linalg.lstsq(aug, rhs, rcond=None)
    fitted = A @ coef
    err = np.linalg.norm(fitted - target) / max(np.linalg.norm(target), 1e-300)
    density = np.zeros(surface.m, dtype=complex)
    density[sigma_idx] = coef
    return density, float(err), {"reg": float(reg), "dof": int(len(sigma_idx))}

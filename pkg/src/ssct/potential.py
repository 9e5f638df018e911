"""The potential class V = V0 + chi^2 D^s g + alpha dsigma.

Acts two ways: as a source builder (V times a wave, split into a grid
part and a weighted surface density) and as a bilinear form. The
fractional part is realized as the bandlimited grid function
chi^2 D^s g; the pairing <g, D^s(chi u chi v)> is kept as an
independent code path and the two must agree by discrete Plancherel.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import Field, Hypersurface


def riesz_derivative(s, f):
    """Fourier multiplier |xi|^s on the discrete lattice.

    The zero frequency maps to zero, except at s = 0 where the
    multiplier is identically one (identity map).
    """
    if s == 0:
        return f.copy()
    absxi = f.grid.abs_xi()
    mult = np.zeros_like(absxi)
    mask = absxi > 0
    mult[mask] = absxi[mask] ** s
    return Field.from_hat(f.grid, mult * f.hat())


def trace_at(f, points):
    """Trigonometric interpolation of a grid field at arbitrary points.

    Spectrally exact for bandlimited fields; reproduces grid samples at
    the nodes to rounding.
    """
    grid = f.grid
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != grid.d:
        raise ValueError("points must be %d-dimensional" % grid.d)
    if np.any(np.abs(points) > grid.L):
        raise ValueError("points must lie inside the box")
    fhat = f.hat()
    n = grid.n
    # per-axis phase matrices exp(i xi_k (x_a + L)), shape (m, n)
    phases = [np.exp(1j * np.outer(points[:, a] + grid.L, grid.freq_axis))
              for a in range(grid.d)]
    if grid.d == 2:
        t = np.einsum("ak,kl->al", phases[0], fhat)
        vals = np.einsum("al,al->a", phases[1], t)
    else:
        t = np.einsum("ak,klm->alm", phases[0], fhat)
        t = np.einsum("al,alm->am", phases[1], t)
        vals = np.einsum("am,am->a", phases[2], t)
    return vals / n ** grid.d


@dataclass
class SourceBundle:
    """V applied to a wave: a grid part plus a weighted surface density."""
    grid_part: Optional[Field]
    surface: Optional[Hypersurface]
    surface_values: Optional[np.ndarray]  # alpha * u at the shell nodes


class Potential:
    """Three-part potential record V = V0 + chi^2 D^s g + alpha dsigma."""

    def __init__(self, grid, v0=None, shell=None, frac=None, support_radius=None):
        self.grid = grid
        self.v0 = v0
        self.shell = None
        self.frac = None
        if v0 is not None:
            if v0.grid != grid:
                raise ValueError("v0 grid mismatch")
            if np.max(np.abs(v0.data.imag)) > 0:
                raise ValueError("v0 must be real-valued")
        if shell is not None:
            surface, alpha = shell
            alpha = np.asarray(alpha, dtype=float)
            if alpha.shape == ():
                alpha = np.full(surface.m, float(alpha))
            if len(alpha) != surface.m:
                raise ValueError("alpha must have one value per shell node")
            self.shell = (surface, alpha)
        if frac is not None:
            s, g, chi = frac
            if not (0.5 < s < 1.0):
                raise ValueError("fractional order s must lie in (1/2, 1)")
            if g.grid != grid or chi.grid != grid:
                raise ValueError("fractional part grid mismatch")
            if np.max(np.abs(g.data.imag)) > 0 or np.max(np.abs(chi.data.imag)) > 0:
                raise ValueError("g and chi must be real-valued")
            if np.min(chi.data.real) < -1e-12 or np.max(chi.data.real) > 1 + 1e-12:
                raise ValueError("chi must take values in [0, 1]")
            self.frac = (float(s), g, chi)
        if support_radius is None:
            support_radius = grid.L / 2.0
        self.support_radius = float(support_radius)
        self._gamma = None

    @property
    def is_zero(self):
        return self.v0 is None and self.shell is None and self.frac is None

    def gamma_field(self):
        """The bandlimited realization chi^2 D^s g of the fractional part."""
        if self.frac is None:
            raise ValueError("potential has no fractional part")
        if self._gamma is None:
            s, g, chi = self.frac
            self._gamma = (chi * chi) * riesz_derivative(s, g)
        return self._gamma

    def grid_multiplier(self):
        """V0 + gamma as one grid field (zero field if neither present)."""
        total = Field(self.grid)
        if self.v0 is not None:
            total = total + self.v0
        if self.frac is not None:
            total = total + self.gamma_field()
        return total

    def shell_traces(self, u):
        """Trace of a grid field at the shell nodes (spectral interpolation)."""
        if self.shell is None:
            raise ValueError("potential has no shell part")
        return trace_at(u, self.shell[0].nodes)

    def bilinear(self, u, v, traces_u=None, traces_v=None):
        """Three-part pairing integral(V0 u v) + sum w alpha u v + <g, D^s(chi u chi v)>.

        Traces at the shell nodes must be supplied (or are interpolated)
        when the shell part is present. Bilinear, no conjugation.
        """
        total = 0.0 + 0.0j
        if self.v0 is not None:
            total += (self.v0 * u).inner(v)
        if self.shell is not None:
            surface, alpha = self.shell
            if traces_u is None:
                traces_u = trace_at(u, surface.nodes)
            if traces_v is None:
                traces_v = trace_at(v, surface.nodes)
            total += complex(np.sum(surface.weights * alpha * traces_u * traces_v))
        if self.frac is not None:
            s, g, chi = self.frac
            total += g.inner(riesz_derivative(s, (chi * u) * (chi * v)))
        return total

    def apply_as_source(self, u, traces=None):
        """Assemble V u as the data the resolvent consumes.

        Grid part (V0 + gamma) u; surface part alpha u restricted to the
        shell nodes, quadrature weights attached downstream.
        """
        grid_part = None
        if self.v0 is not None or self.frac is not None:
            grid_part = self.grid_multiplier() * u
        surface = None
        values = None
        if self.shell is not None:
            surface, alpha = self.shell
            if traces is None:
                traces = trace_at(u, surface.nodes)
            values = alpha * np.asarray(traces, dtype=complex)
        return SourceBundle(grid_part, surface, values)

    def content_hash(self):
        """Stable hash for cache keys."""
        import hashlib
        hsh = hashlib.sha256()
        if self.v0 is not None:
            hsh.update(self.v0.data.tobytes())
        if self.shell is not None:
            surface, alpha = self.shell
            hsh.update(surface.nodes.tobytes())
            hsh.update(alpha.tobytes())
        if self.frac is not None:
            s, g, chi = self.frac
            hsh.update(np.float64(s).tobytes())
            hsh.update(g.data.tobytes())
            hsh.update(chi.data.tobytes())
        return hsh.hexdigest()[:16]


def bump_cutoff(grid, radius, sharpness=8.0):
    """Smooth radial cutoff in [0, 1], equal to 1 well inside `radius`.

    C-infinity-style tanh profile; compactly supported to rounding.
    """
    r = grid.radius()
    vals = 0.5 * (1.0 - np.tanh(sharpness * (r - radius) / radius))
    vals[vals < 1e-14] = 0.0
    return Field(grid, np.minimum(vals, 1.0))


def sobolev_norm(f, s):
    """Discrete H^s norm: ||(1+|xi|^2)^{s/2} fhat||_2 with grid measure."""
    grid = f.grid
    mult = (1.0 + grid.abs_xi() ** 2) ** (0.5 * s)
    hat = f.hat()
    # Parseval with the grid measure: ||f||_2^2 = (h^d / n^d) sum |fhat|^2
    scale = grid.cell_volume / grid.n ** grid.d
    return math.sqrt(float(np.sum(np.abs(mult * hat) ** 2)) * scale)

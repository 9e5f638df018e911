"""Uniform box grids, fields on them, and hypersurface quadrature meshes."""

import io
import math
from dataclasses import dataclass, field as dc_field

import numpy as np


class BoxGrid:
    """Origin-centered uniform periodic grid on [-L, L)^d.

    n must be a power of two; the frequency lattice is xi_k = (pi/L) k
    with k in [-n/2, n/2)^d.
    """

    def __init__(self, d, L, n):
        if d not in (2, 3):
            raise ValueError("dimension must be 2 or 3")
        if n < 2 or (n & (n - 1)) != 0:
            raise ValueError("n must be a power of two, got %r" % (n,))
        if L <= 0:
            raise ValueError("L must be positive")
        self.d = d
        self.L = float(L)
        self.n = int(n)
        self.h = 2.0 * self.L / self.n
        self.axis = -self.L + self.h * np.arange(self.n)
        # fftfreq ordering so no shifts are needed around np.fft calls
        self.freq_axis = 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.h)
        self._coords = None
        self._freqs = None
        self._abs_xi = None

    @property
    def shape(self):
        return (self.n,) * self.d

    @property
    def cell_volume(self):
        return self.h ** self.d

    def coords(self):
        """Meshgrid of sample coordinates, tuple of d arrays."""
        if self._coords is None:
            self._coords = np.meshgrid(*([self.axis] * self.d), indexing="ij")
        return self._coords

    def freqs(self):
        """Meshgrid of frequency coordinates in fft ordering."""
        if self._freqs is None:
            self._freqs = np.meshgrid(*([self.freq_axis] * self.d), indexing="ij")
        return self._freqs

    def abs_xi(self):
        """|xi| over the frequency lattice."""
        if self._abs_xi is None:
            self._abs_xi = np.sqrt(sum(f ** 2 for f in self.freqs()))
        return self._abs_xi

    def radius(self):
        """|x| over the sample lattice."""
        return np.sqrt(sum(c ** 2 for c in self.coords()))

    def __eq__(self, other):
        return (isinstance(other, BoxGrid) and self.d == other.d
                and self.L == other.L and self.n == other.n)

    def __hash__(self):
        return hash((self.d, self.L, self.n))

    def __repr__(self):
        return "BoxGrid(d=%d, L=%g, n=%d)" % (self.d, self.L, self.n)


class Field:
    """Complex samples on a BoxGrid; the universal wave/source container."""

    def __init__(self, grid, data=None):
        self.grid = grid
        if data is None:
            data = np.zeros(grid.shape, dtype=complex)
        else:
            data = np.asarray(data, dtype=complex)
            if data.shape != grid.shape:
                raise ValueError("data shape %r does not match grid %r"
                                 % (data.shape, grid.shape))
        self.data = data

    def copy(self):
        return Field(self.grid, self.data.copy())

    def hat(self):
        return np.fft.fftn(self.data)

    @classmethod
    def from_hat(cls, grid, hat):
        return cls(grid, np.fft.ifftn(hat))

    def l2(self):
        """L^2 norm with the grid measure."""
        return math.sqrt(float(np.sum(np.abs(self.data) ** 2)) * self.grid.cell_volume)

    def inner(self, other):
        """Bilinear grid pairing integral(u v), no conjugation."""
        return complex(np.sum(self.data * other.data)) * self.grid.cell_volume

    def __add__(self, other):
        return Field(self.grid, self.data + other.data)

    def __sub__(self, other):
        return Field(self.grid, self.data - other.data)

    def __mul__(self, c):
        if isinstance(c, Field):
            return Field(self.grid, self.data * c.data)
        return Field(self.grid, self.data * c)

    __rmul__ = __mul__

    def __neg__(self):
        return Field(self.grid, -self.data)


def gaussian_field(grid, amplitude=1.0, center=None, width=0.25):
    """Real Gaussian bump exp(-|x-c|^2 / (2 width^2)) scaled by amplitude."""
    if center is None:
        center = (0.0,) * grid.d
    coords = grid.coords()
    r2 = sum((c - cc) ** 2 for c, cc in zip(coords, center))
    return Field(grid, amplitude * np.exp(-r2 / (2.0 * width ** 2)))


@dataclass
class Hypersurface:
    """Quadrature mesh: nodes, weights, outward unit normals, patch labels."""
    nodes: np.ndarray      # (m, d)
    weights: np.ndarray    # (m,)
    normals: np.ndarray    # (m, d)
    patch_ids: np.ndarray  # (m,) int
    closed: bool = True
    meta: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        self.normals = np.asarray(self.normals, dtype=float)
        self.patch_ids = np.asarray(self.patch_ids, dtype=int)
        m = len(self.nodes)
        if not (len(self.weights) == len(self.normals) == len(self.patch_ids) == m):
            raise ValueError("node/weight/normal/patch arrays must share length")
        if np.any(self.weights <= 0):
            raise ValueError("weights must be positive")
        lens = np.linalg.norm(self.normals, axis=1)
        if np.any(np.abs(lens - 1.0) > 1e-12):
            raise ValueError("normals must be unit length")

    @property
    def m(self):
        return len(self.nodes)

    @property
    def d(self):
        return self.nodes.shape[1]

    def area(self):
        return float(np.sum(self.weights))

    def to_csv(self):
        """One row per node: coordinates, weight, normal, patch id."""
        buf = io.StringIO()
        d = self.d
        cols = (["x", "y", "z"][:d] + ["w"] + ["nx", "ny", "nz"][:d] + ["patch_id"])
        buf.write(",".join(cols) + "\n")
        for i in range(self.m):
            row = list(self.nodes[i]) + [self.weights[i]] + list(self.normals[i])
            buf.write(",".join("%.17g" % v for v in row))
            buf.write(",%d\n" % self.patch_ids[i])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text, closed=True):
        lines = [ln for ln in text.strip().splitlines() if ln.strip()]
        header = lines[0].split(",")
        d = 3 if "z" in header else 2
        nodes, weights, normals, pids = [], [], [], []
        for ln in lines[1:]:
            vals = ln.split(",")
            nodes.append([float(v) for v in vals[:d]])
            weights.append(float(vals[d]))
            normals.append([float(v) for v in vals[d + 1:2 * d + 1]])
            pids.append(int(vals[2 * d + 1]))
        return cls(np.array(nodes), np.array(weights), np.array(normals),
                   np.array(pids), closed=closed)


def make_sphere(center, radius, resolution):
    """Sphere quadrature mesh: Gauss-Legendre in polar, trapezoid in azimuth.

    Spectrally accurate for smooth integrands; normals are radial.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    if resolution < 8:
        raise ValueError("resolution must be at least 8")
    center = np.asarray(center, dtype=float)
    if center.shape == ():
        center = np.zeros(3)
    n_theta = resolution // 2
    n_phi = resolution
    # Gauss-Legendre nodes in cos(theta)
    mu, wmu = np.polynomial.legendre.leggauss(n_theta)
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    wphi = 2.0 * np.pi / n_phi
    nodes, weights, normals = [], [], []
    for j in range(n_theta):
        ct = mu[j]
        st = math.sqrt(max(0.0, 1.0 - ct * ct))
        for p in phi:
            nrm = np.array([st * math.cos(p), st * math.sin(p), ct])
            nodes.append(center + radius * nrm)
            weights.append(radius * radius * wmu[j] * wphi)
            normals.append(nrm)
    m = len(nodes)
    return Hypersurface(np.array(nodes), np.array(weights), np.array(normals),
                        np.zeros(m, dtype=int), closed=True,
                        meta={"kind": "sphere", "center": tuple(center),
                              "radius": radius, "resolution": resolution})


def make_circle(center, radius, resolution):
    """Circle quadrature in d=2 (trapezoid rule; spectrally accurate)."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    if resolution < 8:
        raise ValueError("resolution must be at least 8")
    center = np.asarray(center, dtype=float)
    m = resolution
    t = 2.0 * np.pi * np.arange(m) / m
    normals = np.stack([np.cos(t), np.sin(t)], axis=1)
    nodes = center[None, :] + radius * normals
    weights = np.full(m, 2.0 * np.pi * radius / m)
    return Hypersurface(nodes, weights, normals, np.zeros(m, dtype=int),
                        closed=True, meta={"kind": "circle", "radius": radius})


class CapSelector:
    """Spherical-cap patch predicate: axis direction plus opening angle."""

    def __init__(self, axis, angle, center=None):
        axis = np.asarray(axis, dtype=float)
        self.axis = axis / np.linalg.norm(axis)
        self.angle = float(angle)
        self.center = None if center is None else np.asarray(center, dtype=float)

    def __call__(self, surface):
        center = self.center
        if center is None:
            center = np.asarray(surface.meta.get("center", np.zeros(surface.d)))
        rel = surface.nodes - center[None, :]
        rel = rel / np.linalg.norm(rel, axis=1)[:, None]
        cosang = rel @ self.axis
        return cosang >= math.cos(self.angle)


class AllSelector:
    """Selects the whole surface."""

    def __call__(self, surface):
        return np.ones(surface.m, dtype=bool)


def select_patch(surface, selector):
    """Node indices of the patch picked out by the selector predicate."""
    mask = np.asarray(selector(surface), dtype=bool)
    idx = np.nonzero(mask)[0]
    if len(idx) == 0:
        raise ValueError("selector picked no nodes")
    return idx

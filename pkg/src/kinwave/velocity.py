"""Discrete velocity space: tensor lattice, sphere rule, moments,
weighted inner products, the five-function orthogonal basis and the
macroscopic/microscopic projections.

A "grid function" is simply an ndarray of shape ``grid.counts``; all
operations accept/return plain arrays.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import gas
from .errors import GridTooNarrow, OverflowSignal
from .gas import R_GAS, FluidTriple

#: Default grid extent in thermal radii, sqrt(R*theta) units.
EXTENT_RADII = 6.0


def sphere_rule(n_polar: int = 2, n_azimuth: int = 4,
                azimuth_offset: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Product quadrature on the unit sphere.

    Gauss-Legendre in cos(polar angle) times a uniform azimuth rule; the
    polar axis is e3.  Weights sum to 4*pi exactly.  ``azimuth_offset`` is
    in units of the azimuth spacing (0.5 staggers the nodes off the axes).
    """
    x, wx = np.polynomial.legendre.leggauss(n_polar)
    phi = 2.0 * math.pi * (np.arange(n_azimuth) + azimuth_offset) / n_azimuth
    wphi = 2.0 * math.pi / n_azimuth
    ct, p = np.meshgrid(x, phi, indexing="ij")
    st = np.sqrt(1.0 - ct ** 2)
    nodes = np.stack([st * np.cos(p), st * np.sin(p), ct * np.ones_like(p)],
                     axis=-1).reshape(-1, 3)
    weights = (wx[:, None] * wphi * np.ones(n_azimuth)[None, :]).reshape(-1)
    return nodes, weights


@dataclass(frozen=True)
class VelocityGrid:
    """Cell-centered tensor lattice over a cube plus a sphere rule.

    Nodes along each axis: center_i - L + (k + 1/2) * (2L / N_i), so the
    lattice is symmetric about the center and the uniform weight
    h1*h2*h3 realizes the midpoint rule (spectrally accurate for
    Maxwellian-type integrands).

    The default sphere rule (polar=1, azimuth=4, offset=0) puts the
    quadrature directions on +-e1, +-e2.  For those directions the
    post-collision velocities are exact lattice nodes, which makes the
    bilinear collision quadrature conserve mass, momentum and energy to
    roundoff on any lattice.  Off-axis rules (polar >= 2 or fractional
    offset) sample the sphere more densely but lose that exactness.
    """

    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    half_width: float = 6.0
    counts: tuple[int, int, int] = (16, 16, 16)
    sphere_polar: int = 1
    sphere_azimuth: int = 4
    sphere_offset: float = 0.0

    axes: tuple[np.ndarray, ...] = field(init=False, repr=False)
    nodes: np.ndarray = field(init=False, repr=False)       # (N, 3)
    weight: float = field(init=False)                       # uniform
    spacing: tuple[float, float, float] = field(init=False)
    omega: np.ndarray = field(init=False, repr=False)       # (Ns, 3)
    omega_weight: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float)
        L = float(self.half_width)
        n = tuple(int(k) for k in self.counts)
        if L <= 0 or any(k < 2 for k in n):
            raise ValueError("half_width must be positive, counts >= 2")
        h = tuple(2.0 * L / k for k in n)
        axes = tuple(c[i] - L + (np.arange(n[i]) + 0.5) * h[i] for i in range(3))
        X1, X2, X3 = np.meshgrid(*axes, indexing="ij")
        nodes = np.stack([X1, X2, X3], axis=-1).reshape(-1, 3)
        om, ow = sphere_rule(self.sphere_polar, self.sphere_azimuth,
                             self.sphere_offset)
        object.__setattr__(self, "center", tuple(c))
        object.__setattr__(self, "counts", n)
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "spacing", h)
        object.__setattr__(self, "weight", h[0] * h[1] * h[2])
        object.__setattr__(self, "omega", om)
        object.__setattr__(self, "omega_weight", ow)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    def zeros(self) -> np.ndarray:
        return np.zeros(self.counts)

    def node_array(self, component: int) -> np.ndarray:
        """Node coordinate ``component`` as an array of shape ``counts``."""
        return self.nodes[:, component].reshape(self.counts)

    def maxwellian(self, s: FluidTriple) -> np.ndarray:
        return gas.maxwellian(s, self.nodes).reshape(self.counts)

    def integrate(self, f: np.ndarray) -> float:
        return self.weight * float(np.sum(f))


def grid_for_state(s: FluidTriple, counts=(16, 16, 16), extent_radii: float = EXTENT_RADII,
                   **sphere_kw) -> VelocityGrid:
    """Grid centered at the bulk velocity covering ``extent_radii`` thermal
    radii (default 6, which captures the Gaussian mass to ~1e-8)."""
    return VelocityGrid(center=tuple(s.u),
                        half_width=extent_radii * math.sqrt(R_GAS * s.theta),
                        counts=counts, **sphere_kw)


def moments(f: np.ndarray, grid: VelocityGrid) -> gas.ConservedTriple:
    """Quadrature of the five collision-invariant moments of f."""
    fl = np.asarray(f).reshape(-1)
    w = grid.weight
    rho = w * float(fl.sum())
    m = w * (grid.nodes.T @ fl)
    E = 0.5 * w * float((np.einsum("ni,ni->n", grid.nodes, grid.nodes)) @ fl)
    return gas.ConservedTriple(rho=rho, m=tuple(m), E=E)


def fluid_from_distribution(f: np.ndarray, grid: VelocityGrid) -> FluidTriple:
    """Primitive state carried by f, with v = 1/rho (Lagrangian volume)."""
    return gas.conserved_to_primitive(moments(f, grid))


def inner(g1: np.ndarray, g2: np.ndarray, mref: FluidTriple,
          grid: VelocityGrid) -> float:
    """Weighted inner product <g1, g2> = int g1 g2 / M_ref dxi."""
    M = grid.maxwellian(mref)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        integrand = np.asarray(g1) * np.asarray(g2) / M
    if not np.all(np.isfinite(integrand)):
        raise OverflowSignal("integrand not finite; grid too wide for Mref")
    return grid.integrate(integrand)


def chi_basis(s: FluidTriple, grid: VelocityGrid,
              gram_tol: float = 1e-3) -> list[np.ndarray]:
    """The five pairwise orthogonal basis functions of the macroscopic
    subspace at state ``s`` (orthonormal in the M-weighted product).

    Raises GridTooNarrow when the discrete Gram matrix deviates from the
    identity by more than ``gram_tol`` (default 1e-3: grid narrower than
    ~6 thermal radii or too coarse for the state).  Projections remain
    exact for any invertible Gram matrix, so consumers that only need the
    discrete split (the coarse kinetic solver) may relax the gate.
    """
    M = grid.maxwellian(s)
    rho = s.rho
    a2 = R_GAS * s.theta
    du = [grid.node_array(i) - s.u[i] for i in range(3)]
    q = du[0] ** 2 + du[1] ** 2 + du[2] ** 2
    chi = [M / math.sqrt(rho)]
    chi += [du[i] / math.sqrt(a2 * rho) * M for i in range(3)]
    chi.append((q / a2 - 3.0) / math.sqrt(6.0 * rho) * M)
    G = gram_matrix(chi, s, grid)
    if np.max(np.abs(G - np.eye(5))) > gram_tol:
        raise GridTooNarrow(
            f"Gram deviation {np.max(np.abs(G - np.eye(5))):.3e} > {gram_tol}; "
            "increase extent or counts")
    return chi


def gram_matrix(chi: list[np.ndarray], s: FluidTriple,
                grid: VelocityGrid) -> np.ndarray:
    M = grid.maxwellian(s)
    flat = np.stack([c.reshape(-1) for c in chi])      # (5, N)
    return grid.weight * (flat / M.reshape(-1)) @ flat.T


class Projector:
    """Macroscopic/microscopic projections at a fixed state.

    Coefficients are computed against the discrete Gram matrix (a 5x5
    solve), which makes P0 and P1 exactly idempotent on the grid
    regardless of quadrature error.
    """

    def __init__(self, s: FluidTriple, grid: VelocityGrid,
                 gram_tol: float = 1e-3):
        self.state = s
        self.grid = grid
        self.chi = chi_basis(s, grid, gram_tol=gram_tol)
        self.M = grid.maxwellian(s)
        self._chi_flat = np.stack([c.reshape(-1) for c in self.chi])
        self._chi_w = self._chi_flat / self.M.reshape(-1) * grid.weight
        self._gram = self._chi_w @ self._chi_flat.T
        self._gram_inv = np.linalg.inv(self._gram)

    def coefficients(self, f: np.ndarray) -> np.ndarray:
        b = self._chi_w @ np.asarray(f).reshape(-1)
        return self._gram_inv @ b

    def macro(self, f: np.ndarray) -> np.ndarray:
        c = self.coefficients(f)
        return (c @ self._chi_flat).reshape(self.grid.counts)

    def micro(self, f: np.ndarray) -> np.ndarray:
        return np.asarray(f) - self.macro(f)


def project_macro(f: np.ndarray, s: FluidTriple, grid: VelocityGrid) -> np.ndarray:
    return Projector(s, grid).macro(f)


def project_micro(f: np.ndarray, s: FluidTriple, grid: VelocityGrid) -> np.ndarray:
    return Projector(s, grid).micro(f)


def reference_maxwellian(states_theta, states_v, states_u1) -> FluidTriple:
    """Reference state M_# for weighted norms over a family of states.

    theta_# = clamp(0.9*min theta, max theta/2 + eps, max theta - eps) keeps
    theta_#
    strictly between theta/2 and theta wherever the family allows it; v_#
    and u_# are domain averages.
    """
    th = np.atleast_1d(np.asarray(states_theta, dtype=float))
    vv = np.atleast_1d(np.asarray(states_v, dtype=float))
    uu = np.atleast_1d(np.asarray(states_u1, dtype=float))
    eps = 1e-6 * float(th.max())
    lo = 0.5 * float(th.max()) + eps
    hi = float(th.max()) - eps
    theta_ref = min(max(0.9 * float(th.min()), lo), hi)
    return FluidTriple(v=float(vv.mean()), u=(float(uu.mean()), 0.0, 0.0),
                       theta=theta_ref)


@dataclass
class DistributionField:
    """Distribution values on (x-grid) x (velocity grid) with an attached
    reference Maxwellian for weighted norms."""

    ygrid: np.ndarray                 # (Nx,), uniform
    grid: VelocityGrid
    values: np.ndarray                # (Nx, n1, n2, n3)
    mref: FluidTriple

    def __post_init__(self):
        self.ygrid = np.asarray(self.ygrid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        expected = (self.ygrid.size,) + self.grid.counts
        if self.values.shape != expected:
            raise ValueError(f"values shape {self.values.shape} != {expected}")

    @property
    def dy(self) -> float:
        return float(self.ygrid[1] - self.ygrid[0])

    def weighted_norm2(self, values: np.ndarray | None = None) -> float:
        """Squared norm integral |f|^2 / M_# dxi dy."""
        vals = self.values if values is None else values
        Mref = self.grid.maxwellian(self.mref)
        per_y = self.grid.weight * np.sum(vals ** 2 / Mref, axis=(1, 2, 3))
        if not np.all(np.isfinite(per_y)):
            raise OverflowSignal("weighted norm integrand not finite")
        return float(np.trapezoid(per_y, self.ygrid))

    def save(self, path, binary: bool = True) -> None:
        """Flat layout: text header (counts, extent, center, nx, y-range),
        then node values in row-major, xi1-fastest order."""
        header = {
            "counts": [int(c) for c in self.grid.counts],
            "half_width": float(self.grid.half_width),
            "center": [float(c) for c in self.grid.center],
            "nx": int(self.ygrid.size),
            "y0": float(self.ygrid[0]),
            "y1": float(self.ygrid[-1]),
            "mref": [float(x) for x in
                     (self.mref.v, *self.mref.u, self.mref.theta)],
            "binary": int(binary),
        }
        # xi1-fastest: transpose velocity axes before flattening
        flat = self.values.transpose(0, 3, 2, 1).reshape(self.ygrid.size, -1)
        with open(path, "wb") as fh:
            fh.write((json.dumps(header) + "\n").encode())
            if binary:
                flat.astype(np.float64).tofile(fh)
            else:
                np.savetxt(fh, flat, delimiter=",")

    @classmethod
    def load(cls, path, sphere_kw: dict | None = None) -> "DistributionField":
        with open(path, "rb") as fh:
            header = json.loads(fh.readline().decode())
            grid = VelocityGrid(center=tuple(header["center"]),
                                half_width=header["half_width"],
                                counts=tuple(header["counts"]),
                                **(sphere_kw or {}))
            nx = header["nx"]
            if header["binary"]:
                flat = np.fromfile(fh, dtype=np.float64)
            else:
                flat = np.loadtxt(fh, delimiter=",").reshape(-1)
            vals = flat.reshape((nx,) + grid.counts[::-1]).transpose(0, 3, 2, 1)
        mv = header["mref"]
        mref = FluidTriple(v=mv[0], u=tuple(mv[1:4]), theta=mv[4])
        ygrid = np.linspace(header["y0"], header["y1"], nx)
        return cls(ygrid=ygrid, grid=grid, values=vals, mref=mref)

"""Equation of state and equilibrium distributions for the monatomic gas.

The gas constant is fixed at R = 2/3 so that the internal energy per unit
mass equals the temperature and p = 2*theta/(3*v).  All states are expressed
in Lagrangian variables: specific volume v = 1/rho, velocity u = (u1,u2,u3),
temperature theta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonphysicalState

# Gas constant, fixed by the normalization e = theta.
R_GAS = 2.0 / 3.0


@dataclass(frozen=True)
class FluidTriple:
    """Primitive macroscopic state (v, u, theta) in Lagrangian variables."""

    v: float
    u: tuple[float, float, float] = (0.0, 0.0, 0.0)
    theta: float = 1.0

    def __post_init__(self):
        if not (self.v > 0.0 and self.theta > 0.0):
            raise NonphysicalState(
                f"need v > 0 and theta > 0, got v={self.v}, theta={self.theta}")
        object.__setattr__(self, "u", tuple(float(c) for c in self.u))

    @property
    def u1(self) -> float:
        return self.u[0]

    @property
    def rho(self) -> float:
        return 1.0 / self.v


@dataclass(frozen=True)
class ConservedTriple:
    """Conserved variables (rho, m=rho*u, E=rho*(e+|u|^2/2))."""

    rho: float
    m: tuple[float, float, float]
    E: float

    def __post_init__(self):
        object.__setattr__(self, "m", tuple(float(c) for c in self.m))


def pressure(s: FluidTriple) -> float:
    """p = 2*theta/(3*v); the velocity does not enter."""
    return 2.0 * s.theta / (3.0 * s.v)


def sound_speed(s: FluidTriple) -> float:
    """Largest characteristic speed sqrt(5p/(3v)) = sqrt(10*theta)/(3v)."""
    return math.sqrt(5.0 * pressure(s) / (3.0 * s.v))


def eigenvalues(s: FluidTriple) -> tuple[float, float, float]:
    """Characteristic speeds (lambda1, lambda2, lambda3) = (-c, 0, c)."""
    c = sound_speed(s)
    return (-c, 0.0, c)


def entropy(s: FluidTriple) -> float:
    """s(v, theta) = ln theta + (2/3) ln v.

    Normalized so s(1, 1) = 0; constant along isentropes
    theta * v**(2/3) = const, which is the only property the wave curves
    use.
    """
    return math.log(s.theta) + (2.0 / 3.0) * math.log(s.v)


def maxwellian(s: FluidTriple, xi: np.ndarray) -> np.ndarray:
    """Local Maxwellian M_[rho,u,theta](xi) with rho = 1/v.

    ``xi`` has shape (..., 3); the return value has shape (...).
    """
    xi = np.asarray(xi, dtype=float)
    a2 = R_GAS * s.theta
    du = xi - np.asarray(s.u)
    q = np.einsum("...i,...i->...", du, du)
    return s.rho * (2.0 * math.pi * a2) ** (-1.5) * np.exp(-q / (2.0 * a2))


def primitive_to_conserved(s: FluidTriple) -> ConservedTriple:
    rho = s.rho
    u = np.asarray(s.u)
    E = rho * (s.theta + 0.5 * float(u @ u))
    return ConservedTriple(rho=rho, m=tuple(rho * u), E=E)


def conserved_to_primitive(c: ConservedTriple) -> FluidTriple:
    if not c.rho > 0.0:
        raise NonphysicalState(f"rho = {c.rho} <= 0")
    m = np.asarray(c.m)
    e_int = c.E - 0.5 * float(m @ m) / c.rho
    if not e_int > 0.0:
        raise NonphysicalState(
            f"internal energy {e_int} <= 0 (E={c.E}, |m|^2/2rho={0.5 * float(m @ m) / c.rho})")
    u = m / c.rho
    theta = e_int / c.rho
    return FluidTriple(v=1.0 / c.rho, u=tuple(u), theta=theta)


@dataclass(frozen=True)
class TransportLaw:
    """Hard-sphere transport coefficients mu = A1*sqrt(theta),
    kappa = A2*sqrt(theta).

    The default ratio A2/A1 = 5/2 is the monatomic Chapman-Enskog value
    kappa/mu = 15 R / 4 with R = 2/3.
    """

    A1: float = 1.0
    A2: float = 2.5

    def mu(self, theta):
        return self.A1 * np.sqrt(theta)

    def kappa(self, theta):
        return self.A2 * np.sqrt(theta)

    def dmu(self, theta):
        return 0.5 * self.A1 / np.sqrt(theta)

    def dkappa(self, theta):
        return 0.5 * self.A2 / np.sqrt(theta)


DEFAULT_TRANSPORT = TransportLaw()

"""Composite ansatz, weight function, shift dynamics and the stability
functionals (weighted relative entropy, layer-weighted quadratic forms,
perturbation norms, microscopic field split)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NonpositiveState
from .gas import DEFAULT_TRANSPORT, FluidTriple, TransportLaw, pressure
from .profiles import ContactWave, RarefactionWave, ShockProfile
from .riemann import RiemannDecomposition


@dataclass
class AnsatzFrame:
    """Composite profile and the shock-layer quantities on a fixed y-grid
    at one (t, X)."""

    t: float
    X: float
    y: np.ndarray
    v: np.ndarray
    u1: np.ndarray
    theta: np.ndarray
    vS_y: np.ndarray           # shifted shock derivatives
    u1S_y: np.ndarray
    thetaS_y: np.ndarray
    vR_y: np.ndarray           # rarefaction derivative (unshifted frame arg)
    a: np.ndarray              # weight evaluated at y - X

    @property
    def p(self) -> np.ndarray:
        return 2.0 * self.theta / (3.0 * self.v)


class CompositeAnsatz:
    """Superposition of the three wave families minus the connecting
    plateau states, with the shock part evaluated at y - X."""

    def __init__(self, decomp: RiemannDecomposition,
                 transport: TransportLaw = DEFAULT_TRANSPORT,
                 contact_kw: dict | None = None):
        self.decomp = decomp
        self.transport = transport
        self.rarefaction = RarefactionWave(decomp) if decomp.delta_r > 0 else None
        self.contact = ContactWave(decomp, transport, **(contact_kw or {})) \
            if decomp.delta_c > 0 else None
        self.shock = ShockProfile(decomp, transport) if decomp.delta_s > 0 else None
        self.lam_weight = decomp.delta_s ** 0.75 if decomp.delta_s > 0 else 0.0

    def frame(self, t: float, X: float, y: np.ndarray) -> AnsatzFrame:
        y = np.asarray(y, dtype=float)
        d = self.decomp
        x_arg = y + d.sigma * t
        if self.rarefaction is not None:
            r = self.rarefaction.eval(t, x_arg)
            vR, u1R, thR, vR_y = r["v"], r["u1"], r["theta"], r["v_x"]
        else:
            vR = np.full_like(y, d.mid_lo.v)
            u1R = np.full_like(y, d.mid_lo.u1)
            thR = np.full_like(y, d.mid_lo.theta)
            vR_y = np.zeros_like(y)
        if self.contact is not None:
            c = self.contact.eval(t, x_arg)
            vC, u1C, thC = c["v"], c["u1"], c["theta"]
        else:
            vC = np.full_like(y, d.mid_hi.v)
            u1C = np.full_like(y, d.mid_hi.u1)
            thC = np.full_like(y, d.mid_hi.theta)
        if self.shock is not None:
            sh = self.shock.eval(y - X)
            vS, u1S, thS = sh["v"], sh["u1"], sh["theta"]
            vS_y, u1S_y, thS_y = sh["v_y"], sh["u1_y"], sh["theta_y"]
            a = 1.0 + self.lam_weight / d.delta_s * (vS - d.mid_hi.v)
        else:
            vS = np.full_like(y, d.right.v)
            u1S = np.full_like(y, d.right.u1)
            thS = np.full_like(y, d.right.theta)
            vS_y = u1S_y = thS_y = np.zeros_like(y)
            a = np.ones_like(y)
        v = vR + vC + vS - d.mid_lo.v - d.mid_hi.v
        u1 = u1R + u1C + u1S - d.mid_lo.u1 - d.mid_hi.u1
        th = thR + thC + thS - d.mid_lo.theta - d.mid_hi.theta
        return AnsatzFrame(t=t, X=X, y=y, v=v, u1=u1, theta=th,
                           vS_y=vS_y, u1S_y=u1S_y, thetaS_y=thS_y,
                           vR_y=vR_y, a=a)


def weight_a(y, shock: ShockProfile, delta_s: float) -> np.ndarray:
    """Monotone shock-layer weight 1 + delta_s^(-1/4) (v^S(y) - v^*),
    ranging over (1, 1 + delta_s^(3/4))."""
    vS = shock.eval(y)["v"]
    return 1.0 + delta_s ** (-0.25) * (vS - shock.v_star)


def weight_a_prime(y, shock: ShockProfile, delta_s: float) -> np.ndarray:
    return delta_s ** (-0.25) * shock.eval(y)["v_y"]


def shift_H(mid_hi: FluidTriple, sigma_star: float,
            transport: TransportLaw = DEFAULT_TRANSPORT) -> float:
    """Coupling constant of the shift ODE,
    H = 20 p^* / (3 (v^*)^2 (sigma^*)^3) * (5 mu + 3 kappa)/(10 mu + 3 kappa)
    with the transport coefficients at theta^*."""
    p_star = pressure(mid_hi)
    mu = transport.mu(mid_hi.theta)
    kap = transport.kappa(mid_hi.theta)
    return (20.0 * p_star / (3.0 * mid_hi.v ** 2 * sigma_star ** 3)
            * (5.0 * mu + 3.0 * kap) / (10.0 * mu + 3.0 * kap))


def shift_H_alpha_form(mid_hi: FluidTriple, sigma_star: float,
                       transport: TransportLaw = DEFAULT_TRANSPORT) -> float:
    """Equivalent form 3 alpha^*/(sigma^*)^2 * (5mu+3kappa)/(10mu+3kappa)
    with alpha^* = 20 p^*/(9 (v^*)^2 sigma^*)."""
    p_star = pressure(mid_hi)
    alpha = 20.0 * p_star / (9.0 * mid_hi.v ** 2 * sigma_star)
    mu = transport.mu(mid_hi.theta)
    kap = transport.kappa(mid_hi.theta)
    return 3.0 * alpha / sigma_star ** 2 * (5.0 * mu + 3.0 * kap) \
        / (10.0 * mu + 3.0 * kap)


def shift_rhs(fields: tuple[np.ndarray, np.ndarray, np.ndarray],
              frame: AnsatzFrame, delta_s: float, H: float) -> float:
    """Xdot = -(H/delta_s) int a(y-X) [ v^S_y (pbar/vbar) phi
    + u^S_1y psi_1 + theta^S_y zeta / thetabar ] dy (trapezoid)."""
    v, u1, th = fields
    phi = v - frame.v
    psi1 = u1 - frame.u1
    zeta = th - frame.theta
    pbar = frame.p
    integrand = frame.a * (frame.vS_y * pbar / frame.v * phi
                           + frame.u1S_y * psi1
                           + frame.thetaS_y * zeta / frame.theta)
    return -(H / delta_s) * float(np.trapezoid(integrand, frame.y))


def _phi_entropy(z: np.ndarray) -> np.ndarray:
    return z - 1.0 - np.log(z)


def relative_entropy(fields, frame: AnsatzFrame) -> float:
    """Weighted relative entropy
    int a [ (2/3) thetabar Phi(v/vbar) + thetabar Phi(theta/thetabar)
    + sum psi_i^2 / 2 ] dy with Phi(z) = z - 1 - ln z."""
    v, u, th = fields[0], fields[1], fields[2]
    if np.any(v <= 0) or np.any(th <= 0) or np.any(frame.v <= 0) \
            or np.any(frame.theta <= 0):
        raise NonpositiveState("relative entropy needs positive v, theta")
    zv = v / frame.v
    zt = th / frame.theta
    psi2 = (u[0] - frame.u1) ** 2
    if len(u) > 1:
        psi2 = psi2 + u[1] ** 2 + u[2] ** 2
    integrand = frame.a * ((2.0 / 3.0) * frame.theta * _phi_entropy(zv)
                           + frame.theta * _phi_entropy(zt) + 0.5 * psi2)
    return float(np.trapezoid(integrand, frame.y))


def lambda_functionals(fields, frame: AnsatzFrame) -> tuple[float, float]:
    """Layer-weighted quadratic functionals: the rarefaction one weights
    (phi, zeta) by |v^R_y|, the shock one weights (phi, psi, zeta) by
    |v^S_y( . - X)|."""
    v, u, th = fields[0], fields[1], fields[2]
    phi = v - frame.v
    zeta = th - frame.theta
    psi2 = (u[0] - frame.u1) ** 2
    if len(u) > 1:
        psi2 = psi2 + u[1] ** 2 + u[2] ** 2
    lam_r = float(np.trapezoid(np.abs(frame.vR_y) * (phi ** 2 + zeta ** 2),
                               frame.y))
    lam_s = float(np.trapezoid(np.abs(frame.vS_y)
                               * (phi ** 2 + psi2 + zeta ** 2), frame.y))
    return lam_r, lam_s


# ---------------------------------------------------------------------------
# shift history and diagnostics records
# ---------------------------------------------------------------------------

@dataclass
class ShiftState:
    """Piecewise-linear record of the shift and its rate."""

    H: float
    times: list[float] = field(default_factory=lambda: [0.0])
    X_values: list[float] = field(default_factory=lambda: [0.0])
    Xdot_values: list[float] = field(default_factory=list)

    @property
    def X(self) -> float:
        return self.X_values[-1]

    def advance(self, xdot: float, dt: float) -> None:
        self.Xdot_values.append(xdot)
        self.X_values.append(self.X_values[-1] + dt * xdot)
        self.times.append(self.times[-1] + dt)

    def max_abs_xdot(self) -> float:
        return max((abs(x) for x in self.Xdot_values), default=0.0)


@dataclass
class DiagnosticsFrame:
    t: float
    X: float
    Xdot: float
    entropy: float
    lambda_r: float
    lambda_s: float
    sup_phi: float
    sup_psi: float
    sup_zeta: float
    l2_pert: float
    micro_norm: float | None = None

    CSV_HEADER = ("t,X,Xdot,entropy,lambdaR,lambdaS,sup_phi,sup_psi,"
                  "sup_zeta,l2_pert,micro_norm")

    def csv_row(self) -> str:
        mn = "" if self.micro_norm is None else f"{self.micro_norm:.12g}"
        return (f"{self.t:.12g},{self.X:.12g},{self.Xdot:.12g},"
                f"{self.entropy:.12g},{self.lambda_r:.12g},"
                f"{self.lambda_s:.12g},{self.sup_phi:.12g},"
                f"{self.sup_psi:.12g},{self.sup_zeta:.12g},"
                f"{self.l2_pert:.12g},{mn}")


def diagnostics_frame(t: float, fields, frame: AnsatzFrame, shift: ShiftState,
                      xdot: float, micro_norm: float | None = None
                      ) -> DiagnosticsFrame:
    v, u, th = fields[0], fields[1], fields[2]
    phi = v - frame.v
    psi1 = u[0] - frame.u1
    psi23 = np.sqrt(u[1] ** 2 + u[2] ** 2) if len(u) > 1 else 0.0
    zeta = th - frame.theta
    lam_r, lam_s = lambda_functionals(fields, frame)
    pert2 = phi ** 2 + psi1 ** 2 + zeta ** 2
    if len(u) > 1:
        pert2 = pert2 + u[1] ** 2 + u[2] ** 2
    return DiagnosticsFrame(
        t=t, X=shift.X, Xdot=xdot,
        entropy=relative_entropy(fields, frame),
        lambda_r=lam_r, lambda_s=lam_s,
        sup_phi=float(np.max(np.abs(phi))),
        sup_psi=float(np.max(np.abs(psi1) + psi23)),
        sup_zeta=float(np.max(np.abs(zeta))),
        l2_pert=math.sqrt(float(np.trapezoid(pert2, frame.y))),
        micro_norm=micro_norm)


# ---------------------------------------------------------------------------
# microscopic split
# ---------------------------------------------------------------------------

def g_tilde_split(G: np.ndarray, shock_micro_shifted: np.ndarray,
                  sources: dict[str, np.ndarray], states: list[FluidTriple],
                  operators: list, grid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split the microscopic field: G_tilde = G - G^S( . - X), then remove
    the non-time-integrable rarefaction/contact streaming part

        G0 = (3/(2 v theta)) L^{-1} P1[ xi1 M ( xi1 du + |xi-u|^2/(2theta) dth ) ]

    where du, dth are the rarefaction+contact derivative sources.  Returns
    (G_tilde, G0, G1 = G_tilde - G0) as (ny, *counts) arrays.
    """
    from .gas import R_GAS

    G_t = G - shock_micro_shifted
    G0 = np.zeros_like(G)
    du = sources["u1_y"]
    dth = sources["theta_y"]
    xi1 = grid.node_array(0)
    for i, (s, op) in enumerate(zip(states, operators)):
        if du[i] == 0.0 and dth[i] == 0.0:
            continue
        M = grid.maxwellian(s)
        a2 = R_GAS * s.theta
        q = sum((grid.node_array(k) - s.u[k]) ** 2 for k in range(3))
        src = xi1 * M * (xi1 * du[i] + q / (2.0 * s.theta) * dth[i])
        rhs = op.projector.micro(src)
        G0[i] = 1.5 / (s.v * s.theta) * op.invert_micro(rhs)
    return G_t, G0, G_t - G0


# ---------------------------------------------------------------------------
# auxiliary inequalities / changes of variables
# ---------------------------------------------------------------------------

def poincare_check(z: np.ndarray, f: np.ndarray) -> tuple[float, float]:
    """Both sides of int |f - mean f|^2 <= (1/2) int z (1-z) |f'|^2 on
    [0, 1]; derivatives by centered differences."""
    z = np.asarray(z, dtype=float)
    f = np.asarray(f, dtype=float)
    mean = float(np.trapezoid(f, z)) / (z[-1] - z[0])
    lhs = float(np.trapezoid((f - mean) ** 2, z))
    fp = np.gradient(f, z)
    rhs = 0.5 * float(np.trapezoid(z * (1.0 - z) * fp ** 2, z))
    return lhs, rhs


class LayerCoordinate:
    """Bijection y <-> z = (v^S(y - X) - v^*)/delta_s onto (0, 1)."""

    def __init__(self, shock: ShockProfile, X: float = 0.0):
        self.shock = shock
        self.X = X
        self.delta_s = shock.decomp.delta_s

    def z_of(self, y) -> np.ndarray:
        vS = self.shock.eval(np.asarray(y) - self.X)["v"]
        return (vS - self.shock.v_star) / self.delta_s

    def dz_dy(self, y) -> np.ndarray:
        return self.shock.eval(np.asarray(y) - self.X)["v_y"] / self.delta_s

    def identity_residual(self, y) -> np.ndarray:
        """Algebraic identity z(1-z) = (v^S - v^*)(v_+ - v^S)/delta_s^2,
        reported as a pointwise residual."""
        vS = self.shock.eval(np.asarray(y) - self.X)["v"]
        z = (vS - self.shock.v_star) / self.delta_s
        rhs = (vS - self.shock.v_star) * (self.shock.v_plus - vS) \
            / self.delta_s ** 2
        return z * (1.0 - z) - rhs


def z_change_of_variables(shock: ShockProfile, X: float = 0.0) -> LayerCoordinate:
    return LayerCoordinate(shock, X)

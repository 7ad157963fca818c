"""Wave-curve geometry of the Euler system.

Decomposes a pair of far-field states into the generic pattern
1-rarefaction / 2-contact / 3-shock with two intermediate states, and
provides the forward generator used as the test oracle.

Conventions: the decomposition runs left -> mid_lo -> mid_hi -> right; the
strengths are
    delta_R = v_mid_lo - v_left      (rarefaction)
    delta_C = |v_mid_hi - v_mid_lo|  (contact)
    delta_S = v_right - v_mid_hi     (shock)
and the generator opens the contact toward smaller volume on the left
(v_mid_lo = v_mid_hi - delta_C).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import InvalidStrength, NoPhysicalShock, OutOfPatternRange
from .gas import FluidTriple, entropy, pressure, sound_speed

#: Newton tolerance / iteration cap for the two-state solve.
NEWTON_TOL = 1e-12
NEWTON_MAXIT = 50
#: Largest wave strength solve_riemann will accept.
MAX_STRENGTH = 0.5


def lambda1(v: float, s_ent: float) -> float:
    """First characteristic speed along the isentrope s(v, theta) = s_ent."""
    return -math.sqrt(10.0) / 3.0 * math.exp(0.5 * s_ent) * v ** (-4.0 / 3.0)


def _u1_integral(s_ent: float, v_from: float, v_to: float) -> float:
    """Closed form of int_{v_from}^{v_to} lambda_1(eta, s) deta."""
    return math.sqrt(10.0) * math.exp(0.5 * s_ent) * (
        v_to ** (-1.0 / 3.0) - v_from ** (-1.0 / 3.0))


def rarefaction_left_of(right: FluidTriple, v_left: float) -> FluidTriple:
    """State on the 1-rarefaction curve through ``right`` at volume v_left.

    The curve keeps the entropy of ``right``; the velocity difference is
    the closed-form integral of lambda_1 along the isentrope.
    """
    if not v_left < right.v:
        raise InvalidStrength(f"need v_left < v_right, got {v_left} >= {right.v}")
    s_ent = entropy(right)
    theta = math.exp(s_ent) * v_left ** (-2.0 / 3.0)
    u1 = right.u1 - _u1_integral(s_ent, right.v, v_left)
    return FluidTriple(v=v_left, u=(u1, 0.0, 0.0), theta=theta)


def u1_difference_quadrature(right: FluidTriple, v_left: float) -> float:
    """Adaptive-quadrature oracle for the rarefaction velocity change."""
    s_ent = entropy(right)
    val, _ = quad(lambda v: lambda1(v, s_ent), right.v, v_left,
                  epsabs=1e-13, epsrel=1e-13)
    return -val


def _hugoniot_theta_right(mid_hi: FluidTriple, v_plus: float) -> float:
    """Temperature behind the 3-shock from the Hugoniot relation
    theta_+ - theta^* = -(p_+ + p^*)(v_+ - v^*)/2."""
    dv = v_plus - mid_hi.v
    p_star = pressure(mid_hi)
    denom = 1.0 + dv / (3.0 * v_plus)
    return (mid_hi.theta - 0.5 * p_star * dv) / denom


def shock_right_of(mid_hi: FluidTriple, delta_s: float) -> tuple[FluidTriple, float]:
    """Right state and speed of the 3-shock with strength v_+ - v^* = delta_s.

    Solves the Rankine-Hugoniot relations in closed form and checks the Lax
    condition lambda_3+ < sigma < lambda_3^*.
    """
    if not delta_s > 0.0:
        raise InvalidStrength("shock strength must be positive")
    if delta_s > 0.5 * mid_hi.v:
        raise InvalidStrength(
            f"delta_s={delta_s} too large for base volume {mid_hi.v}")
    v_plus = mid_hi.v + delta_s
    theta_plus = _hugoniot_theta_right(mid_hi, v_plus)
    if theta_plus <= 0.0:
        raise NoPhysicalShock("Hugoniot temperature nonpositive")
    p_star = pressure(mid_hi)
    p_plus = 2.0 * theta_plus / (3.0 * v_plus)
    if p_plus >= p_star:
        raise NoPhysicalShock("pressure must drop across the 3-shock")
    sigma = math.sqrt((p_star - p_plus) / delta_s)
    u1_plus = mid_hi.u1 - sigma * delta_s
    right = FluidTriple(v=v_plus, u=(u1_plus, 0.0, 0.0), theta=theta_plus)
    if not (sound_speed(right) < sigma < sound_speed(mid_hi)):
        raise NoPhysicalShock(
            f"Lax condition failed: {sound_speed(right)} < {sigma} < "
            f"{sound_speed(mid_hi)}")
    return right, sigma


def rh_residual(mid_hi: FluidTriple, right: FluidTriple, sigma: float) -> float:
    """Max residual of the three Rankine-Hugoniot relations."""
    p_l, p_r = pressure(mid_hi), pressure(right)
    e_l = mid_hi.theta + 0.5 * mid_hi.u1 ** 2
    e_r = right.theta + 0.5 * right.u1 ** 2
    r1 = -sigma * (right.v - mid_hi.v) - (right.u1 - mid_hi.u1)
    r2 = -sigma * (right.u1 - mid_hi.u1) + (p_r - p_l)
    r3 = -sigma * (e_r - e_l) + (p_r * right.u1 - p_l * mid_hi.u1)
    return max(abs(r1), abs(r2), abs(r3))


@dataclass(frozen=True)
class RiemannDecomposition:
    left: FluidTriple
    mid_lo: FluidTriple          # (v_*,  u_*,  theta_*)
    mid_hi: FluidTriple          # (v^*,  u^*,  theta^*)
    right: FluidTriple
    delta_r: float
    delta_c: float
    delta_s: float
    sigma: float

    @property
    def sigma_star(self) -> float:
        """lambda_3 at mid_hi, the upper Lax bound."""
        return sound_speed(self.mid_hi)

    def validate(self, tol: float = 1e-10) -> None:
        """Check the defining curve relations; raises on violation."""
        if abs(entropy(self.left) - entropy(self.mid_lo)) > 1e-9:
            raise OutOfPatternRange("mid_lo not on the isentrope of left")
        if abs(self.mid_lo.u1 - self.mid_hi.u1) > tol or \
                abs(pressure(self.mid_lo) - pressure(self.mid_hi)) > tol:
            raise OutOfPatternRange("contact relation u1 = u1, p = p violated")
        if self.delta_s > 0.0 and rh_residual(self.mid_hi, self.right,
                                              self.sigma) > tol:
            raise OutOfPatternRange("Rankine-Hugoniot residual too large")


def generate_states(right: FluidTriple, delta_r: float, delta_c: float,
                    delta_s: float) -> RiemannDecomposition:
    """Forward generator: compose the three wave curves backwards from
    ``right`` with the requested strengths (oracle for solve_riemann)."""
    if min(delta_r, delta_c, delta_s) < 0.0:
        raise InvalidStrength("strengths must be nonnegative")
    # invert the shock: given right and delta_s, recover mid_hi
    if delta_s > 0.0:
        v_hi = right.v - delta_s
        if v_hi <= 0.0:
            raise NoPhysicalShock("shock strength exceeds right volume")
        denom = 1.0 - delta_s / (3.0 * v_hi)
        if denom <= 0.0:
            raise NoPhysicalShock("shock strength beyond Hugoniot range")
        theta_hi = (right.theta + 0.5 * pressure(right) * delta_s) / denom
        p_hi = 2.0 * theta_hi / (3.0 * v_hi)
        if p_hi <= pressure(right):
            raise NoPhysicalShock("pressure must drop across the 3-shock")
        sigma = math.sqrt((p_hi - pressure(right)) / delta_s)
        u1_hi = right.u1 + sigma * delta_s
        mid_hi = FluidTriple(v=v_hi, u=(u1_hi, 0.0, 0.0), theta=theta_hi)
        if not (sound_speed(right) < sigma < sound_speed(mid_hi)):
            raise NoPhysicalShock("Lax condition failed")
    else:
        mid_hi = right
        sigma = sound_speed(mid_hi)
    # contact: equal u1 and p, volume opens to the left
    if delta_c > 0.0:
        v_lo = mid_hi.v - delta_c
        if v_lo <= 0.0:
            raise NoPhysicalShock("contact strength exceeds mid volume")
        theta_lo = mid_hi.theta * v_lo / mid_hi.v
        mid_lo = FluidTriple(v=v_lo, u=mid_hi.u, theta=theta_lo)
    else:
        mid_lo = mid_hi
    left = rarefaction_left_of(mid_lo, mid_lo.v - delta_r) \
        if delta_r > 0.0 else mid_lo
    return RiemannDecomposition(left=left, mid_lo=mid_lo, mid_hi=mid_hi,
                                right=right, delta_r=delta_r, delta_c=delta_c,
                                delta_s=delta_s, sigma=sigma)


def _presolve_guess(left: FluidTriple, right: FluidTriple) -> np.ndarray:
    """Initial (v_*, v^*) from a scalar solve for the contact pressure.

    For a given contact pressure P the rarefaction and shock branches give
    closed-form volumes and velocities; the velocity mismatch across the
    contact is monotone in P, so a bracketed root gives an excellent
    Newton starting point.
    """
    from scipy.optimize import brentq

    s_left = entropy(left)
    p_plus = pressure(right)

    def branches(P: float):
        v_lo = (2.0 * math.exp(s_left) / (3.0 * P)) ** 0.6
        u1_lo = left.u1 - _u1_integral(s_left, left.v, v_lo)
        v_hi = (right.theta + 0.5 * (P + p_plus) * right.v) / (2.0 * P + 0.5 * p_plus)
        dv = right.v - v_hi
        if dv <= 0.0 or P <= p_plus:
            u1_hi = right.u1
        else:
            u1_hi = right.u1 + math.sqrt((P - p_plus) / dv) * dv
        return v_lo, v_hi, u1_lo - u1_hi

    def f(P: float) -> float:
        return branches(P)[2]

    p_a = p_plus * (1.0 + 1e-12)
    p_b = p_plus
    for _ in range(60):
        p_b *= 1.05
        if f(p_a) * f(p_b) <= 0.0:
            break
    else:
        raise OutOfPatternRange("no contact-pressure bracket")
    P = brentq(f, p_a, p_b, xtol=1e-13, rtol=1e-14)
    v_lo, v_hi, _ = branches(P)
    return np.array([v_lo, v_hi])


def shock_decomposition(mid_hi: FluidTriple, delta_s: float) -> RiemannDecomposition:
    """Pure-shock decomposition with a fixed upstream state (zero
    rarefaction and contact strengths); used for strength sweeps."""
    right, sigma = shock_right_of(mid_hi, delta_s)
    return RiemannDecomposition(left=mid_hi, mid_lo=mid_hi, mid_hi=mid_hi,
                                right=right, delta_r=0.0, delta_c=0.0,
                                delta_s=delta_s, sigma=sigma)


def solve_riemann(left: FluidTriple, right: FluidTriple) -> RiemannDecomposition:
    """Decompose (left, right) into R1-CD2-S3 with two intermediate states.

    Damped Newton on (v_*, v^*) with a finite-difference Jacobian.  Raises
    OutOfPatternRange when the iteration fails, produces negative strengths
    (wrong pattern) or a strength above MAX_STRENGTH.
    """
    if left == right:
        sig = sound_speed(right)
        return RiemannDecomposition(left=left, mid_lo=left, mid_hi=left,
                                    right=right, delta_r=0.0, delta_c=0.0,
                                    delta_s=0.0, sigma=sig)
    s_left = entropy(left)
    p_plus = pressure(right)

    def residual(vv: np.ndarray) -> np.ndarray:
        v_lo, v_hi = vv
        if v_lo <= 0 or v_hi <= 0 or v_lo <= left.v * 0.2:
            return np.array([1e6, 1e6])
        theta_lo = math.exp(s_left) * v_lo ** (-2.0 / 3.0)
        u1_lo = left.u1 - _u1_integral(s_left, left.v, v_lo)
        p_lo = 2.0 * theta_lo / (3.0 * v_lo)
        # contact: p_hi = p_lo, u1_hi = u1_lo
        theta_hi = 1.5 * p_lo * v_hi
        dv = right.v - v_hi
        if dv <= 0:
            return np.array([1e6, 1e6])
        # Hugoniot and velocity matching across the shock
        r1 = right.theta - theta_hi + 0.5 * (p_plus + p_lo) * dv
        sig2 = (p_lo - p_plus) / dv
        if sig2 <= 0:
            return np.array([1e6, 1e6])
        r2 = right.u1 - u1_lo + math.sqrt(sig2) * dv
        return np.array([r1, r2])

    vv = _presolve_guess(left, right)
    res = residual(vv)
    for _ in range(NEWTON_MAXIT):
        if np.max(np.abs(res)) < NEWTON_TOL:
            break
        J = np.empty((2, 2))
        for j in range(2):
            dvj = 1e-7 * max(abs(vv[j]), 1.0)
            vp = vv.copy()
            vp[j] += dvj
            J[:, j] = (residual(vp) - res) / dvj
        try:
            step = np.linalg.solve(J, -res)
        except np.linalg.LinAlgError as exc:
            raise OutOfPatternRange(f"singular Jacobian: {exc}") from exc
        lam = 1.0
        for _ in range(40):
            cand = vv + lam * step
            rc = residual(cand)
            if np.linalg.norm(rc) < np.linalg.norm(res):
                vv, res = cand, rc
                break
            lam *= 0.5
        else:
            raise OutOfPatternRange("Newton damping stalled")
    else:
        raise OutOfPatternRange(
            f"Newton did not converge: residual {np.max(np.abs(res)):.3e}")

    v_lo, v_hi = vv
    delta_r = v_lo - left.v
    delta_s = right.v - v_hi
    delta_c = abs(v_hi - v_lo)
    tiny = 1e-11 * max(left.v, right.v)
    if delta_r < -tiny or delta_s < -tiny:
        raise OutOfPatternRange(
            f"pattern mismatch: delta_R={delta_r:.3e}, delta_S={delta_s:.3e}")
    if max(delta_r, delta_c, delta_s) > MAX_STRENGTH:
        raise OutOfPatternRange("wave strength above configured bound")
    theta_lo = math.exp(s_left) * v_lo ** (-2.0 / 3.0)
    u1_lo = left.u1 - _u1_integral(s_left, left.v, v_lo)
    mid_lo = FluidTriple(v=v_lo, u=(u1_lo, 0.0, 0.0), theta=theta_lo)
    mid_hi = FluidTriple(v=v_hi, u=(u1_lo, 0.0, 0.0),
                         theta=1.5 * pressure(mid_lo) * v_hi)
    if delta_s > tiny:
        sigma = math.sqrt((pressure(mid_hi) - p_plus) / (right.v - v_hi))
        if not (sound_speed(right) < sigma < sound_speed(mid_hi)):
            raise NoPhysicalShock("Lax condition failed in solve")
    else:
        sigma = sound_speed(mid_hi)
    return RiemannDecomposition(left=left, mid_lo=mid_lo, mid_hi=mid_hi,
                                right=right, delta_r=max(delta_r, 0.0),
                                delta_c=delta_c, delta_s=max(delta_s, 0.0),
                                sigma=sigma)

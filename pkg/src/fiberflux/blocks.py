"""Building blocks for volume-preserving flows glued along tori.

Three pieces: a solid torus (block A), pants x circle (block B, boundary
data only), and a thickened torus (block C) carrying a T^2-invariant field
X = f(t) d/dx1 + g(t) d/dx2.  A 1-form p dx1 + q dx2 with nonvanishing
Wronskian p'q - q'p is the boundary-compatible shape ("Lutz pair") that
makes blocks sewable.

Orientation conventions, fixed once: volume form dx1^dx2^dt on the
thickened torus and r dr^dtheta^dpsi on the solid torus; all duality signs
follow from these.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    ScalarFn,
    antiderivative,
    find_roots,
    lincomb,
    polynomial,
    scalarfn_from_spec,
    scalarfn_to_spec,
)
from .errors import (
    DegenerateJetError,
    EvaluationError,
    NotTorusAutomorphismError,
    SingularCoreError,
    SingularFieldError,
    UnsewableError,
)

__all__ = [
    "Profile",
    "LutzPair",
    "LutzReport",
    "BlockA",
    "BlockB",
    "BlockC",
    "BoundaryRecord",
    "Jet",
    "SewResult",
    "lutz_valid",
    "wronskian_fn",
    "block_c_field",
    "block_a_field",
    "sew_lutz",
    "transform_torus",
    "profile_from_spec",
    "profile_to_spec",
]

GRID_PANELS = 1024
TORUS_AREA = 4.0 * math.pi ** 2


# ---------------------------------------------------------------------------
# Profiles and Lutz pairs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Profile:
    """Field components (f, g) of X = f(t) d/dx1 + g(t) d/dx2 on [0, 1].

    The field must be nonsingular: (f, g) never hits (0, 0).  Checked on the
    standard 1024-panel grid at construction.
    """

    f: ScalarFn
    g: ScalarFn

    def __post_init__(self):
        grid = np.linspace(0.0, 1.0, GRID_PANELS + 1)
        fv = np.asarray(self.f.eval(grid), dtype=float)
        gv = np.asarray(self.g.eval(grid), dtype=float)
        if not (np.all(np.isfinite(fv)) and np.all(np.isfinite(gv))):
            bad = int(np.nonzero(~(np.isfinite(fv) & np.isfinite(gv)))[0][0])
            raise EvaluationError(float(grid[bad]), "non-finite component")
        mag = fv * fv + gv * gv
        i = int(np.argmin(mag))
        if mag[i] <= 0.0:
            raise SingularFieldError(float(grid[i]))


@dataclass(frozen=True)
class LutzPair:
    """Coefficients of the 1-form alpha = p dx1 + q dx2 on the t interval.

    No validity is enforced at construction; use lutz_valid."""

    p: ScalarFn
    q: ScalarFn


def wronskian_fn(pair: LutzPair):
    """Callable W(t) = p'(t) q(t) - q'(t) p(t); accepts scalars or arrays."""
    p, q = pair.p, pair.q

    def w(t):
        return p.deriv(t) * q.eval(t) - q.deriv(t) * p.eval(t)

    return w


@dataclass(frozen=True)
class LutzReport:
    is_valid: bool
    min_abs_wronskian: float
    sign: int


def lutz_valid(pair: LutzPair, a: float = 0.0, b: float = 1.0) -> LutzReport:
    """Check the nonvanishing-Wronskian condition on the 1024-panel grid.

    Valid iff |W| stays above 1e-12 and the sign never flips.  Grid minima
    are refined locally, and sign-change candidates found by the root scan
    force invalidity.
    """
    w = wronskian_fn(pair)
    grid = np.linspace(a, b, GRID_PANELS + 1)
    vals = np.asarray(w(grid), dtype=float)
    sign = 1 if vals[int(np.argmax(np.abs(vals)))] >= 0 else -1
    crossings = find_roots(w, a, b, tol=1e-14)
    min_abs = float(np.min(np.abs(vals)))
    if crossings:
        min_abs = min(min_abs, min(abs(float(w(r))) for r in crossings))
    else:
        # local refinement of the grid minimum by ternary search
        i = int(np.argmin(np.abs(vals)))
        lo = float(grid[max(i - 1, 0)])
        hi = float(grid[min(i + 1, GRID_PANELS)])
        for _ in range(60):
            m1 = lo + (hi - lo) / 3.0
            m2 = hi - (hi - lo) / 3.0
            if abs(float(w(m1))) < abs(float(w(m2))):
                hi = m2
            else:
                lo = m1
        min_abs = min(min_abs, abs(float(w(0.5 * (lo + hi)))))
    mixed = bool(np.any(vals > 0.0) and np.any(vals < 0.0)) or bool(crossings)
    return LutzReport(is_valid=(min_abs > 1e-12 and not mixed),
                      min_abs_wronskian=min_abs, sign=sign)


# ---------------------------------------------------------------------------
# Block C: thickened torus
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BlockC:
    """T^2 x [0,1] with coordinates x1, x2 in [0, 2pi] and t in [0, 1].

    Volume form dx1^dx2^dt, total mass 4 pi^2.  The profile may be absent
    while an assembly is under construction."""

    profile: Profile | None = None
    unknotted: bool = False

    @property
    def volume_mass(self) -> float:
        return TORUS_AREA

    @property
    def euler_characteristic(self) -> int:
        return 0


@dataclass(frozen=True)
class BlockCField:
    """X = (f(t), g(t), 0) together with the quadrature antiderivatives
    F(t), G(t) and the primitive 1-form candidate G dx1 - F dx2."""

    profile: Profile
    F: ScalarFn
    G: ScalarFn
    pair: LutzPair

    def velocity(self, state):
        t = float(state[2])
        return np.array([float(self.profile.f.eval(t)),
                         float(self.profile.g.eval(t)), 0.0])


def block_c_field(profile: Profile) -> BlockCField:
    """Field and primitive data for a thickened-torus block.

    F and G are antiderivatives of f and g computed by cached quadrature;
    the returned pair (G, -F) satisfies d(G dx1 - F dx2) = iota_X Omega.
    """
    F = antiderivative(profile.f)
    G = antiderivative(profile.g)
    neg_F = lincomb(-1.0, F, 0.0, F)
    return BlockCField(profile=profile, F=F, G=G,
                       pair=LutzPair(p=G, q=neg_F))


# ---------------------------------------------------------------------------
# Block A: solid torus
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BlockA:
    """S^1 x D^2 with coordinates (theta, r, psi), r in [0, R], carrying the
    1-form phi(r) dtheta + r^2 dpsi.

    A well-formed block has phi > 0, phi'(0) = 0 (smooth core), and the
    boundary condition phi' != (2/r) phi at r = R; use validate()."""

    phi: ScalarFn
    R: float
    unknotted_core: bool = False

    def __post_init__(self):
        if self.R <= 0:
            raise ValueError("outer radius must be positive")

    def boundary_pair(self) -> LutzPair:
        """Lutz data (phi(r), r^2) on the boundary collar, parametrized by r."""
        return LutzPair(p=self.phi, q=polynomial([0.0, 0.0, 1.0]))

    def boundary_jet(self) -> "Jet":
        r = self.R
        return Jet(float(self.phi.eval(r)), r * r,
                   float(self.phi.deriv(r)), 2.0 * r)

    def validate(self) -> list:
        issues = []
        rs = np.linspace(0.0, self.R, GRID_PANELS + 1)
        pv = np.asarray(self.phi.eval(rs), dtype=float)
        if np.min(pv) <= 0.0:
            issues.append(f"phi not positive (min {np.min(pv):g})")
        if abs(float(self.phi.deriv(0.0))) > 1e-9:
            issues.append("phi'(0) != 0: field singular at the core")
        w_boundary = (float(self.phi.deriv(self.R)) * self.R ** 2
                      - 2.0 * self.R * float(self.phi.eval(self.R)))
        if abs(w_boundary) <= 1e-12:
            issues.append("boundary form degenerate: phi' = (2/r) phi at r=R")
        return issues

    @property
    def euler_characteristic(self) -> int:
        return 0


@dataclass(frozen=True)
class BlockAField:
    """Dual field of phi(r) dtheta + r^2 dpsi w.r.t. r dr^dtheta^dpsi:
    X = -2 d/dtheta + (phi'(r)/r) d/dpsi, extended to phi''(0) at r = 0."""

    block: BlockA
    psi_rate_at_core: float

    def psi_rate(self, r: float) -> float:
        if r < 1e-9:
            return self.psi_rate_at_core
        return float(self.block.phi.deriv(r)) / r

    def velocity(self, state):
        r = float(state[1])
        return np.array([-2.0, 0.0, self.psi_rate(r)])


def block_a_field(block: BlockA) -> BlockAField:
    dphi0 = float(block.phi.deriv(0.0))
    if abs(dphi0) > 1e-9:
        raise SingularCoreError(
            f"phi'(0) = {dphi0:g} != 0: psi-rate blows up at the core")
    h = 1e-6
    core_rate = (float(block.phi.deriv(h)) - dphi0) / h
    return BlockAField(block=block, psi_rate_at_core=core_rate)


# ---------------------------------------------------------------------------
# Block B: pants x circle (boundary data only)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundaryRecord:
    """Collar data (h_i, phi_i) at one boundary torus of a pants block:
    the form is phi_i dtheta + h_i dpsi_i with h_i' > 0 and phi_i' >= 0."""

    h: ScalarFn
    phi: ScalarFn
    collar: float = 0.25

    def jet(self) -> "Jet":
        return Jet(float(self.phi.eval(0.0)), float(self.h.eval(0.0)),
                   float(self.phi.deriv(0.0)), float(self.h.deriv(0.0)))

    def validate(self) -> list:
        issues = []
        rs = np.linspace(0.0, self.collar, 257)
        if np.min(np.asarray(self.h.deriv(rs), dtype=float)) <= 0.0:
            issues.append("h' not strictly positive on the collar")
        if np.min(np.asarray(self.phi.deriv(rs), dtype=float)) < 0.0:
            issues.append("phi' negative on the collar")
        return issues


@dataclass(frozen=True)
class BlockB:
    """Pants x S^1.  Only the three boundary collars are modeled; interior
    dynamics stay out of scope."""

    boundary_data: tuple

    def __post_init__(self):
        if len(self.boundary_data) != 3:
            raise ValueError("a pants block has exactly three boundary tori")

    def validate(self) -> list:
        issues = []
        for i, rec in enumerate(self.boundary_data):
            issues.extend(f"boundary {i}: {msg}" for msg in rec.validate())
        return issues

    @property
    def euler_characteristic(self) -> int:
        return 0


# ---------------------------------------------------------------------------
# Sewing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Jet:
    """First-order boundary data (p, q, p', q') of a Lutz pair."""

    p: float
    q: float
    dp: float
    dq: float

    @property
    def radius(self) -> float:
        return math.hypot(self.p, self.q)

    @property
    def angle(self) -> float:
        return math.atan2(self.q, self.p)

    @property
    def wronskian(self) -> float:
        return self.dp * self.q - self.dq * self.p

    @property
    def radius_rate(self) -> float:
        return (self.p * self.dp + self.q * self.dq) / self.radius

    @property
    def turn_rate(self) -> float:
        # W = -R^2 Theta' in polar form, so Theta' = -W / R^2
        return -self.wronskian / (self.radius * self.radius)


@dataclass(frozen=True)
class SewResult:
    pair: LutzPair
    theta_start: float
    theta_total: float
    turns_added: int


def _as_jet(j) -> Jet:
    if isinstance(j, Jet):
        return j
    return Jet(*(float(x) for x in j))


def _cubic(c3, c2, c1, c0):
    def ev(t):
        return ((c3 * t + c2) * t + c1) * t + c0

    def dv(t):
        return (3.0 * c3 * t + 2.0 * c2) * t + c1

    return ev, dv


def _hermite_coeffs(y0, y1, m0, m1):
    return (2.0 * y0 + m0 - 2.0 * y1 + m1,
            -3.0 * y0 - 2.0 * m0 + 3.0 * y1 - m1,
            m0, y0)


def _slope_range(m0, m1, rise):
    """Exact min and max over [0,1] of the derivative of the cubic Hermite
    with endpoint slopes m0, m1 and total rise."""
    # derivative: m0 (1-t)(1-3t) + m1 t(3t-2) + 6 rise t(1-t)
    A = 3.0 * m0 + 3.0 * m1 - 6.0 * rise
    B = -4.0 * m0 - 2.0 * m1 + 6.0 * rise
    C = m0
    values = [C, A + B + C]
    if A != 0.0:
        tv = -B / (2.0 * A)
        if 0.0 < tv < 1.0:
            values.append((A * tv + B) * tv + C)
    return min(values), max(values)


def sew_lutz(left_jet, right_jet, extra_turns: int = 0) -> SewResult:
    """Join two boundary jets at t = 0 and t = 1 by a Lutz pair.

    In polar form (R, Theta) the Wronskian is -R^2 Theta', so a nonvanishing
    single-sign Wronskian means Theta strictly monotone and R > 0.  Theta is
    a monotone cubic Hermite interpolant with endpoint slopes -W/R^2, winding
    by the smallest number of full turns >= extra_turns that keeps the slope
    bounded away from zero; R interpolates log-space, hence stays positive.

    Raises UnsewableError when the jets' Wronskian signs differ (the sign is
    a homotopy invariant), DegenerateJetError on a zero-magnitude jet.
    """
    if extra_turns < 0:
        raise ValueError("extra_turns must be >= 0")
    jl = _as_jet(left_jet)
    jr = _as_jet(right_jet)
    for j in (jl, jr):
        if j.radius < 1e-12:
            raise DegenerateJetError(f"jet {j} has zero magnitude")
    wl, wr = jl.wronskian, jr.wronskian
    if wl == 0.0 or wr == 0.0:
        raise UnsewableError("jet Wronskian vanishes; no Lutz extension")
    if (wl > 0) != (wr > 0):
        raise UnsewableError(
            "jet Wronskians have opposite signs; any extension crosses zero")

    m0, m1 = jl.turn_rate, jr.turn_rate
    increasing = m0 > 0.0
    theta0 = jl.angle
    gap = math.fmod(jr.angle - theta0, 2.0 * math.pi)
    if increasing:
        if gap <= 0.0:
            gap += 2.0 * math.pi
    else:
        if gap >= 0.0:
            gap -= 2.0 * math.pi

    turns = extra_turns
    while True:
        rise = gap + (2.0 * math.pi * turns) * (1.0 if increasing else -1.0)
        lo, hi = _slope_range(m0, m1, rise)
        # once the interpolant is concave (|rise| >= (|m0|+|m1|)/2) its slope
        # minimum sits at an endpoint, so this margin is always reachable
        margin = min(0.02 * abs(rise), 0.25 * min(abs(m0), abs(m1)))
        if (increasing and lo > margin) or (not increasing and hi < -margin):
            break
        turns += 1
        if turns > extra_turns + 1000:
            raise UnsewableError("no feasible monotone interpolant found")

    th_ev, th_dv = _cubic(*_hermite_coeffs(theta0, theta0 + rise, m0, m1))
    l0, l1 = math.log(jl.radius), math.log(jr.radius)
    lm0 = jl.radius_rate / jl.radius
    lm1 = jr.radius_rate / jr.radius
    lg_ev, lg_dv = _cubic(*_hermite_coeffs(l0, l1, lm0, lm1))

    def _trig(t):
        th = th_ev(t)
        if isinstance(t, np.ndarray):
            return np.exp(lg_ev(t)), np.cos(th), np.sin(th)
        return math.exp(lg_ev(t)), math.cos(th), math.sin(th)

    def p_ev(t):
        r, c, s = _trig(t)
        return r * c

    def q_ev(t):
        r, c, s = _trig(t)
        return r * s

    def p_dv(t):
        r, c, s = _trig(t)
        return r * (lg_dv(t) * c - th_dv(t) * s)

    def q_dv(t):
        r, c, s = _trig(t)
        return r * (lg_dv(t) * s + th_dv(t) * c)

    pair = LutzPair(p=ScalarFn(p_ev, p_dv, "sewn"),
                    q=ScalarFn(q_ev, q_dv, "sewn"))
    return SewResult(pair=pair, theta_start=theta0, theta_total=rise,
                     turns_added=turns)


# ---------------------------------------------------------------------------
# Torus coordinate changes
# ---------------------------------------------------------------------------

def _check_gl2z(matrix) -> tuple:
    m = np.asarray(matrix)
    if m.shape != (2, 2):
        raise NotTorusAutomorphismError("matrix must be 2x2")
    entries = []
    for v in m.ravel():
        fv = float(v)
        if fv != int(fv):
            raise NotTorusAutomorphismError("matrix entries must be integers")
        entries.append(int(fv))
    a, b, c, d = entries
    det = a * d - b * c
    if det not in (1, -1):
        raise NotTorusAutomorphismError(f"determinant {det} is not +-1")
    return a, b, c, d, det


def transform_torus(obj, matrix):
    """Change torus coordinates by M in GL2(Z).

    Vector components (profiles) transform by M; 1-form coefficients (Lutz
    pairs) by the inverse transpose, which is again integral since
    det M = +-1.  Transforming by M then M^-1 is the identity.
    """
    a, b, c, d, det = _check_gl2z(matrix)
    if isinstance(obj, Profile):
        return Profile(f=lincomb(a, obj.f, b, obj.g),
                       g=lincomb(c, obj.f, d, obj.g))
    if isinstance(obj, LutzPair):
        # inverse transpose of [[a, b], [c, d]] is [[d, -c], [-b, a]] / det
        return LutzPair(p=lincomb(d * det, obj.p, -c * det, obj.q),
                        q=lincomb(-b * det, obj.p, a * det, obj.q))
    raise TypeError(f"cannot transform object of type {type(obj).__name__}")


# ---------------------------------------------------------------------------
# Profile serialization
# ---------------------------------------------------------------------------

def profile_from_spec(spec: dict) -> Profile:
    """Profile from {"f": {family, params}, "g": {family, params}}."""
    if "f" not in spec or "g" not in spec:
        raise ValueError("profile record needs 'f' and 'g' entries")
    return Profile(f=scalarfn_from_spec(spec["f"]),
                   g=scalarfn_from_spec(spec["g"]))


def profile_to_spec(profile: Profile) -> dict:
    return {"f": scalarfn_to_spec(profile.f),
            "g": scalarfn_to_spec(profile.g)}

"""Moebius maps, the Poincare interval distance, and projective parameters.

The projective parameter p(s) along a null geodesic is the ratio of two
independent solutions of the companion linear ODE

    u'' + q(s) u = 0,      q(s) = -Ric(x'(s), x'(s)) / (n - 2),

normalized so that p(s0) = 0, p'(s0) = 1, p''(s0) = 0.  The ratio has
Schwarzian derivative 2 q, and working in homogeneous coordinates [u1 : u2]
keeps the evaluation pole-free where p passes through infinity.

The image of the maximal affine domain under p (the development arc in the
real projective line) classifies single-link chain costs: a proper arc is
carried onto (-1, 1) by a Moebius chart and measured by the Poincare
distance; a development that fills the line or wraps around costs nothing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp

from . import manifold
from .errors import (
    CriticalPoint,
    GeometryError,
    OutOfInterval,
    PointOffArc,
    SingularTransform,
)
from .geodesic import EndFlag


def poincare_distance(u1: float, u2: float) -> float:
    """Distance on (-1, 1) in the metric 4 du^2 / (1 - u^2)^2."""
    for u in (u1, u2):
        if not -1.0 < u < 1.0:
            raise OutOfInterval(f"{u} is not inside (-1, 1)")
    return abs(math.log((1.0 + u1) * (1.0 - u2) / ((1.0 - u1) * (1.0 + u2))))


# ---------------------------------------------------------------------------
# The projective line
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProjectivePoint:
    """Point of the real projective line in homogeneous coordinates [u1 : u2]."""

    u1: float
    u2: float

    def __post_init__(self):
        norm = math.hypot(self.u1, self.u2)
        if norm == 0.0:
            raise GeometryError("[0 : 0] is not a projective point")
        u1, u2 = self.u1 / norm, self.u2 / norm
        if u2 < 0.0 or (u2 == 0.0 and u1 < 0.0):
            u1, u2 = -u1, -u2
        object.__setattr__(self, "u1", u1)
        object.__setattr__(self, "u2", u2)

    @classmethod
    def from_affine(cls, p) -> "ProjectivePoint":
        if math.isinf(p):
            return cls(1.0, 0.0)
        return cls(float(p), 1.0)

    @classmethod
    def infinity(cls) -> "ProjectivePoint":
        return cls(1.0, 0.0)

    @property
    def is_infinity(self) -> bool:
        return self.u2 == 0.0

    @property
    def affine(self) -> float:
        return math.inf if self.u2 == 0.0 else self.u1 / self.u2

    @property
    def angle(self) -> float:
        """Representative angle in [0, pi): [u1:u2] = [sin a : cos a]."""
        a = math.atan2(self.u1, self.u2)
        return a if a >= 0.0 else a + math.pi

    def close_to(self, other, tol=1e-9) -> bool:
        cross = self.u1 * other.u2 - self.u2 * other.u1
        return abs(cross) <= tol


def projective_det(p: ProjectivePoint, q: ProjectivePoint) -> float:
    return p.u1 * q.u2 - p.u2 * q.u1


def cross_ratio(a: ProjectivePoint, b: ProjectivePoint,
                c: ProjectivePoint, d: ProjectivePoint) -> float:
    """(a,b;c,d) computed homogeneously; infinite entries need no casework."""
    num = projective_det(a, b) * projective_det(c, d)
    den = projective_det(a, c) * projective_det(b, d)
    if den == 0.0:
        raise GeometryError("cross-ratio undefined: coincident points")
    return num / den


@dataclass(frozen=True)
class Moebius:
    """Linear fractional map t -> (a t + b) / (c t + d), |ad - bc| = 1."""

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        det = self.a * self.d - self.b * self.c
        if det == 0.0:
            raise SingularTransform("ad - bc = 0")
        scale = 1.0 / math.sqrt(abs(det))
        for name, value in zip("abcd", (self.a, self.b, self.c, self.d)):
            object.__setattr__(self, name, value * scale)

    @classmethod
    def identity(cls) -> "Moebius":
        return cls(1.0, 0.0, 0.0, 1.0)

    @property
    def det(self) -> float:
        return self.a * self.d - self.b * self.c

    def apply(self, p: ProjectivePoint) -> ProjectivePoint:
        return ProjectivePoint(self.a * p.u1 + self.b * p.u2,
                               self.c * p.u1 + self.d * p.u2)

    def __call__(self, t: float) -> float:
        return self.apply(ProjectivePoint.from_affine(t)).affine

    def compose(self, other: "Moebius") -> "Moebius":
        """self after other."""
        return Moebius(self.a * other.a + self.b * other.c,
                       self.a * other.b + self.b * other.d,
                       self.c * other.a + self.d * other.c,
                       self.c * other.b + self.d * other.d)

    def invert(self) -> "Moebius":
        return Moebius(self.d, -self.b, -self.c, self.a)

    @classmethod
    def taking(cls, sources, targets) -> "Moebius":
        """The map sending three projective points onto three others."""
        return _to_zero_one_inf(*targets).invert().compose(_to_zero_one_inf(*sources))


def _to_zero_one_inf(p1, p2, p3) -> Moebius:
    """Moebius with p1 -> 0, p2 -> 1, p3 -> infinity (homogeneous build)."""
    d23 = projective_det(p2, p3)
    d21 = projective_det(p2, p1)
    if d23 == 0.0 or d21 == 0.0 or projective_det(p1, p3) == 0.0:
        raise SingularTransform("three-point map needs distinct points")
    # numerator row annihilates p1, denominator row annihilates p3
    return Moebius(d23 * p1.u2, -d23 * p1.u1, d21 * p3.u2, -d21 * p3.u1)


# ---------------------------------------------------------------------------
# Schwarzian derivative
# ---------------------------------------------------------------------------

def schwarzian(f: Callable[[float], float], s: float, h: float = 1e-3,
               richardson: bool = True) -> float:
    """Finite-difference Schwarzian f'''/f' - (3/2)(f''/f')^2 at s.

    Second-order central stencils; one Richardson pass (h, h/2) by default.
    Raises CriticalPoint when |f'| is too small for the quotients to mean
    anything.
    """

    def estimate(step):
        f2m, f1m, f0, f1p, f2p = (f(s + k * step) for k in (-2, -1, 0, 1, 2))
        d1 = (f1p - f1m) / (2.0 * step)
        d2 = (f1p - 2.0 * f0 + f1m) / (step * step)
        d3 = (f2p - 2.0 * f1p + 2.0 * f1m - f2m) / (2.0 * step ** 3)
        scale = max(abs(f0), 1.0)
        if abs(d1) < 1e-8 * scale:
            raise CriticalPoint(f"|f'({s})| = {abs(d1):g} too small")
        return d3 / d1 - 1.5 * (d2 / d1) ** 2

    if not richardson:
        return estimate(h)
    coarse = estimate(h)
    fine = estimate(h / 2.0)
    return (4.0 * fine - coarse) / 3.0


# ---------------------------------------------------------------------------
# Companion ODE and projective parameters
# ---------------------------------------------------------------------------

class HomogeneousParameter:
    """Projective parameter carried as two companion-ODE solutions.

    u1 has (u1, u1') = (0, 1) at the base point, u2 has (1, 0); the ratio
    p = u1/u2 then satisfies p(s0) = 0, p'(s0) = 1, p''(s0) = 0 and has
    Schwarzian 2 q.  The Wronskian u1' u2 - u1 u2' == 1 is the conserved
    first integral used as an integration diagnostic.
    """

    def __init__(self, s0, domain, evaluate, wronskian_drift=0.0,
                 trajectory=None, evaluate_many=None, potential=None):
        self.s0 = float(s0)
        self.domain = (float(domain[0]), float(domain[1]))
        self._evaluate = evaluate  # s -> (u1, du1, u2, du2)
        self._evaluate_many = evaluate_many  # array s -> (4, m) array
        self.wronskian_drift = wronskian_drift
        self.trajectory = trajectory
        self.potential = potential  # the companion coefficient q(s), if known

    def raw(self, s):
        if not self.domain[0] - 1e-9 <= s <= self.domain[1] + 1e-9:
            raise GeometryError(f"s = {s} outside parameter domain {self.domain}")
        s = min(max(s, self.domain[0]), self.domain[1])
        return self._evaluate(s)

    def u(self, s):
        u1, _, u2, _ = self.raw(s)
        return u1, u2

    def point(self, s) -> ProjectivePoint:
        u1, u2 = self.u(s)
        return ProjectivePoint(u1, u2)

    def value(self, s) -> float:
        """Affine value p(s); +-inf at poles of the ratio."""
        u1, u2 = self.u(s)
        return u1 / u2 if u2 != 0.0 else math.inf

    def derivative(self, s) -> float:
        u1, du1, u2, du2 = self.raw(s)
        if u2 == 0.0:
            return math.inf
        return (du1 * u2 - u1 * du2) / (u2 * u2)

    def wronskian(self, s) -> float:
        u1, du1, u2, du2 = self.raw(s)
        return du1 * u2 - u1 * du2

    def raw_many(self, ss):
        """(4, m) array of companion solutions at sorted sample points."""
        ss = np.asarray(ss, dtype=float)
        if self._evaluate_many is not None:
            return self._evaluate_many(ss)
        return np.array([self._evaluate(s) for s in ss]).T


def solve_companion(q: Callable[[float], float], domain, s0,
                    rtol: float = 1e-11, atol: float = 1e-13,
                    trajectory=None) -> HomogeneousParameter:
    """Integrate u'' + q u = 0 from s0 toward both ends of ``domain``."""
    lo, hi = float(domain[0]), float(domain[1])
    if not lo <= s0 <= hi:
        raise GeometryError(f"base point {s0} outside domain ({lo}, {hi})")
    y0 = np.array([0.0, 1.0, 1.0, 0.0])

    def rhs(s, y):
        qq = q(s)
        return [y[1], -qq * y[0], y[3], -qq * y[2]]

    pieces = []
    for bound in (lo, hi):
        if abs(bound - s0) < 1e-300:
            continue
        sol = solve_ivp(rhs, (s0, bound), y0, method="RK45", dense_output=True,
                        rtol=rtol, atol=atol)
        if not sol.success:
            raise GeometryError(f"companion integration failed: {sol.message}")
        pieces.append((min(s0, bound), max(s0, bound), sol.sol))

    def evaluate(s):
        if abs(s - s0) < 1e-300:
            return 0.0, 1.0, 1.0, 0.0
        for plo, phi, interp in pieces:
            if plo <= s <= phi:
                return tuple(interp(s))
        raise GeometryError(f"s = {s} not covered by companion solution")

    def evaluate_many(ss):
        out = np.empty((4, len(ss)))
        for plo, phi, interp in pieces:
            mask = (ss >= plo) & (ss <= phi)
            if mask.any():
                out[:, mask] = interp(ss[mask])
        at_base = np.abs(ss - s0) < 1e-300
        if at_base.any():
            out[:, at_base] = np.array([0.0, 1.0, 1.0, 0.0])[:, None]
        return out

    vals = evaluate_many(np.linspace(lo, hi, 64))
    drift = float(np.max(np.abs(vals[1] * vals[2] - vals[0] * vals[3] - 1.0)))
    return HomogeneousParameter(s0, (lo, hi), evaluate,
                                wronskian_drift=drift, trajectory=trajectory,
                                evaluate_many=evaluate_many, potential=q)


class _AffineParameter(HomogeneousParameter):
    """Exact p(s) = s - s0 for the Einstein shortcut (q identically 0)."""

    def __init__(self, s0, domain, trajectory=None):
        def evaluate(s):
            return s - s0, 1.0, 1.0, 0.0

        super().__init__(s0, domain, evaluate, wronskian_drift=0.0,
                         trajectory=trajectory, potential=lambda s: 0.0)


def curvature_along(model, trajectory):
    """s -> Ric(x'(s), x'(s)) along a trajectory."""

    def ric_vv(s):
        x, v = trajectory.state(s)
        ric = manifold.ricci_at(model, x)
        return float(v @ ric @ v)

    return ric_vv


def projective_parameter(model, trajectory, s0, einstein_shortcut="auto",
                         einstein_tol: float = 1e-8, rtol: float = 1e-11,
                         atol: float = None) -> HomogeneousParameter:
    """Projective parameter along a null geodesic, normalized at s0.

    The companion potential is q(s) = -Ric(x', x') / (n - 2), i.e. Schwarzian
    2 q.  With ``einstein_shortcut`` (default: engaged when Ric(x', x')
    vanishes along the curve within tolerance) the affine parameter itself is
    returned, which is exact in that case.
    """
    lo, hi = trajectory.s_minus, trajectory.s_plus
    if not lo < s0 < hi:
        raise GeometryError(f"base point {s0} is not interior to ({lo}, {hi})")
    ric_vv = curvature_along(model, trajectory)
    if einstein_shortcut == "auto":
        pad = 1e-3 * (hi - lo)
        einstein_shortcut = all(
            abs(ric_vv(s)) <= einstein_tol
            for s in np.linspace(lo + pad, hi - pad, 16))
    if einstein_shortcut:
        return _AffineParameter(s0, (lo, hi), trajectory=trajectory)
    n = model.dimension

    def q(s):
        return -ric_vv(s) / (n - 2)

    if atol is None:
        atol = 1e-2 * rtol
    return solve_companion(q, (lo, hi), s0, rtol=rtol, atol=atol,
                           trajectory=trajectory)


# ---------------------------------------------------------------------------
# Development arcs
# ---------------------------------------------------------------------------

class ArcKind(str, Enum):
    PROPER = "ProperArc"
    FULL_LINE = "FullLine"
    WRAPS = "Wraps"


@dataclass(frozen=True)
class DevelopmentArc:
    """Image of the maximal affine domain under the projective parameter.

    For a proper arc, ``chart`` carries the development onto (-1, 1) with the
    base point at 0.  FullLine is only declared for budget-complete ends and
    inherits that caveat; Wraps means the development overlaps itself, which
    admits arbitrarily cheap interval embeddings.
    """

    kind: ArcKind
    start: Optional[ProjectivePoint]
    end: Optional[ProjectivePoint]
    chart: Optional[Moebius]
    domain: tuple
    conditional: bool = False

    @property
    def endpoints(self):
        return self.start, self.end


def _exit_ladder(end, interior_ref, rungs=12, ratio=0.55):
    """Parameters approaching a finite end, offsets shrinking geometrically.

    Aitken acceleration of values along this ladder converges to the limit at
    the end itself without ever evaluating there (where the companion ODE is
    least accurate near a curvature singularity).
    """
    gap = interior_ref - end
    return [end + gap * ratio ** k for k in range(1, rungs + 1)]


def _budget_ladder(end, interior_ref, rungs=10, ratio=0.75):
    """Parameters marching toward a budget end at geometric growth.

    A power-law tail p(s) ~ p_inf - C s^(-alpha) sampled at geometrically
    growing s produces geometrically shrinking deltas, so acceleration
    extrapolates the ideal limit at infinite affine parameter rather than the
    value at the truncation point.
    """
    gap = end - interior_ref
    return [interior_ref + gap * ratio ** k for k in range(rungs, -1, -1)]


def _aitken_limit(values):
    """Iterated Aitken delta-squared acceleration with a noise guard.

    Deep iteration amplifies roundoff once the deltas reach the noise floor,
    so each pass is scored by its trailing delta and the best pass wins.
    """
    seq = list(values)
    best = seq[-1]
    best_err = abs(seq[-1] - seq[-2]) if len(seq) >= 2 else math.inf
    while len(seq) >= 3:
        nxt = []
        for a, b, c in zip(seq, seq[1:], seq[2:]):
            denom = (c - b) - (b - a)
            if abs(denom) < 1e-300:
                nxt.append(c)
            else:
                nxt.append(c - (c - b) ** 2 / denom)
        seq = nxt
        err = abs(seq[-1] - seq[-2]) if len(seq) >= 2 else 0.0
        if err < best_err:
            best, best_err = seq[-1], err
    return best


def _asymptotic_endpoint(param, end, interior_ref) -> Optional[ProjectivePoint]:
    """Ideal endpoint of a budget-complete end by matching the outer solution.

    Past a complete end the companion potential typically decays like
    q(s) = -c/(s - s*)^2 (exactly so for power-law warped products, and with
    c = 0 for flat space), which makes 1/sqrt|q| affine in s.  Fitting
    (c, s*) from the computed potential tail and matching (u, u') at the
    domain end to the Euler solutions A tau^{r+} + B tau^{r-} gives the
    infinite-parameter limit [A1 : A2] in closed form.  Returns None when the
    tail does not look like that, so the caller can fall back to sequence
    acceleration.
    """
    if param.potential is None:
        return None
    sgn = 1.0 if end >= interior_ref else -1.0
    gap = abs(end - interior_ref)
    ss = np.array([end - sgn * gap * 0.5 * k / 7.0 for k in range(8)])
    qs = np.array([param.potential(s) for s in ss])
    u1, du1, u2, du2 = param.raw(end)
    du1, du2 = sgn * du1, sgn * du2
    qscale = max(abs(q) for q in qs)
    if qscale < 1e-12 / max(gap, 1.0) ** 2:
        # negligible potential: solutions are asymptotically affine in s and
        # the limit is the slope ratio
        if abs(du1) < 1e-300 and abs(du2) < 1e-300:
            return None
        return ProjectivePoint(du1, du2)
    if np.any(qs >= 0.0) and np.any(qs <= 0.0):
        return None
    w = 1.0 / np.sqrt(np.abs(qs))
    slope, intercept = np.polyfit(sgn * ss, w, 1)
    if abs(slope) < 1e-300:
        return None
    resid = np.max(np.abs(np.polyval([slope, intercept], sgn * ss) - w))
    if resid > 1e-3 * (np.max(w) - np.min(w) + 1e-300):
        return None
    s_star = -intercept / slope          # in the mirrored coordinate sgn*s
    c = 1.0 / slope ** 2
    if qs[0] > 0.0:
        c = -c                           # u'' = (c / tau^2) u
    disc = 1.0 + 4.0 * c
    if disc <= 0.0:
        return None                      # oscillatory tail: no single limit
    tau = sgn * end - s_star
    if tau <= 0.0:
        return None
    r_minus = 0.5 * (1.0 - math.sqrt(disc))
    a1 = tau * du1 - r_minus * u1
    a2 = tau * du2 - r_minus * u2
    if abs(a1) < 1e-300 and abs(a2) < 1e-300:
        return None
    return ProjectivePoint(a1, a2)


def _endpoint_limit(param, end, interior_ref, complete) -> ProjectivePoint:
    """Extrapolated projective endpoint via angle acceleration on a ladder.

    Budget-complete ends extrapolate the infinite-affine limit, preferably by
    asymptotic matching of the companion solutions; incomplete ends
    extrapolate the finite limit at the domain boundary.
    """
    if complete:
        point = _asymptotic_endpoint(param, end, interior_ref)
        if point is not None:
            return point
        ladder = _budget_ladder(end, interior_ref)
    else:
        ladder = _exit_ladder(end, interior_ref)
    angles = []
    for s in ladder:
        a = param.point(s).angle
        if angles:
            # unwrap mod pi toward the previous value
            while a - angles[-1] > math.pi / 2:
                a -= math.pi
            while a - angles[-1] < -math.pi / 2:
                a += math.pi
        angles.append(a)
    limit = _aitken_limit(angles)
    return ProjectivePoint(math.sin(limit), math.cos(limit))


def _count_pole_crossings(param, samples=2048):
    """Sign changes of u2 over the domain (zeros of the denominator)."""
    lo, hi = param.domain
    ss = np.linspace(lo, hi, samples)
    u2 = param.raw_many(ss)[2]
    signs = np.sign(u2)
    signs = signs[signs != 0.0]
    return int(np.sum(signs[1:] != signs[:-1]))


def development_arc(param: HomogeneousParameter, domain=None,
                    end_flags=None) -> DevelopmentArc:
    """Classify the development of a projective parameter.

    End flags default to those of the owning trajectory.  At least two zeros
    of u2 mean the development rotated past a full half-turn twice and
    overlaps itself (Wraps).  Budget-complete ends upgrade to FullLine,
    conditionally on the completeness caveat; otherwise the endpoints are
    extrapolated limits and the arc is proper.
    """
    if domain is None:
        domain = param.domain
    if end_flags is None:
        if param.trajectory is None:
            raise GeometryError("need end flags (no owning trajectory)")
        end_flags = param.trajectory.end_flags
    if _count_pole_crossings(param) >= 2:
        return DevelopmentArc(ArcKind.WRAPS, None, None, None, domain)
    minus_complete = end_flags["minus"] is EndFlag.BUDGET_REACHED
    plus_complete = end_flags["plus"] is EndFlag.BUDGET_REACHED
    lo, hi = domain
    ref = param.s0
    start = _endpoint_limit(param, lo, ref, minus_complete)
    end = _endpoint_limit(param, hi, ref, plus_complete)
    if start.close_to(end, tol=1e-9):
        if minus_complete and plus_complete:
            # ideal end limits coincide: the development sweeps RP^1 minus
            # (at most) that single point
            return DevelopmentArc(ArcKind.FULL_LINE, None, None, None, domain,
                                  conditional=True)
        raise GeometryError("development endpoints coincide on an incomplete "
                            "domain; cannot build chart")
    base = param.point(param.s0)
    if start.close_to(base, 1e-12) or end.close_to(base, 1e-12):
        raise GeometryError("base point degenerate with an arc endpoint")
    chart = Moebius.taking((start, base, end),
                           (ProjectivePoint.from_affine(-1.0),
                            ProjectivePoint.from_affine(0.0),
                            ProjectivePoint.from_affine(1.0)))
    return DevelopmentArc(ArcKind.PROPER, start, end, chart, domain,
                          conditional=minus_complete or plus_complete)


def arc_distance(arc: DevelopmentArc, p1: ProjectivePoint,
                 p2: ProjectivePoint, tol: float = 1e-7) -> float:
    """Poincare distance between two points of a development arc.

    Proper arcs are measured through the (-1, 1) chart; full-line or wrapping
    developments admit embeddings of vanishing cost, so the distance is 0.
    """
    if arc.kind is not ArcKind.PROPER:
        return 0.0
    images = []
    for p in (p1, p2):
        a = arc.chart.apply(p).affine
        if not -1.0 - tol < a < 1.0 + tol:
            raise PointOffArc(f"chart image {a} outside (-1, 1)")
        images.append(min(max(a, -1.0 + 1e-15), 1.0 - 1e-15))
    return poincare_distance(images[0], images[1])

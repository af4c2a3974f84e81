"""Chart-based Lorentzian metric models and pointwise curvature.

A model is a chart: a dimension, a metric evaluator returning the symmetric
matrix g_ab at a point, and an open domain predicate.  Builtin models carry
exact Christoffel/Ricci evaluators; everything else goes through central
finite differences of the metric.

Signature convention is (+,...,+,-) with the last coordinate timelike.
Units are geometric (c = 1).  Dimension n >= 3 throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (
    DegenerateMetric,
    EmptySample,
    GeometryError,
    NotNull,
    OutOfDomain,
    SignatureError,
    UnsupportedDimension,
    ZeroSpatialPart,
)

# Condition number above which the metric inverse is refused.
COND_LIMIT = 1e12

# Relative tolerance for "this vector is null".
NULL_TOL = 1e-8


def as_point(x, dimension=None):
    """Coerce coordinates to a float array, checking length if given."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise GeometryError("coordinates must be a flat tuple")
    if dimension is not None and x.size != dimension:
        raise GeometryError(f"expected {dimension} coordinates, got {x.size}")
    return x


@dataclass(frozen=True)
class MetricModel:
    """Analytic Lorentzian metric on a single chart.

    ``metric`` maps coordinates to the symmetric matrix g_ab; ``domain`` is an
    open predicate.  ``christoffel``/``ricci``/``scalar`` are optional exact
    evaluators (builtin models only); when absent the finite-difference path
    is used.
    """

    name: str
    dimension: int
    metric: Callable[[np.ndarray], np.ndarray]
    domain: Callable[[np.ndarray], bool]
    christoffel: Optional[Callable[[np.ndarray], np.ndarray]] = None
    ricci: Optional[Callable[[np.ndarray], np.ndarray]] = None
    scalar: Optional[Callable[[np.ndarray], float]] = None
    # Signed distance-like gauge of how far x sits inside the domain;
    # zero on the boundary.  Lets the integrator catch tangential boundary
    # contacts that a sign-change test on ``domain`` cannot see.
    margin: Optional[Callable[[np.ndarray], float]] = None

    def __post_init__(self):
        if self.dimension < 3:
            raise UnsupportedDimension(
                f"dimension {self.dimension} < 3 is not supported")

    def contains(self, x) -> bool:
        x = as_point(x, self.dimension)
        return bool(self.domain(x))


@dataclass(frozen=True)
class ConformalModel(MetricModel):
    """Metric model obtained by rescaling a base model by Omega(x)^2."""

    base: MetricModel = field(kw_only=True, default=None)
    factor: Callable[[np.ndarray], float] = field(kw_only=True, default=None)


def conformal_model(base: MetricModel, factor, name=None) -> ConformalModel:
    """Wrap ``base`` as the rescaled metric Omega(x)^2 g.

    The factor must be positive on the base domain; violations raise at
    evaluation time.  Curvature of the wrapped model always goes through the
    finite-difference path.
    """

    def rescaled(x):
        omega = float(factor(x))
        if not omega > 0.0:
            raise GeometryError(f"conformal factor {omega} is not positive")
        return omega * omega * base.metric(x)

    return ConformalModel(
        name=name or f"conformal({base.name})",
        dimension=base.dimension,
        metric=rescaled,
        domain=base.domain,
        margin=base.margin,
        base=base,
        factor=factor,
    )


# ---------------------------------------------------------------------------
# Builtin models
# ---------------------------------------------------------------------------

def minkowski(dimension: int = 4) -> MetricModel:
    """Flat metric diag(1, ..., 1, -1) on all of R^n."""
    eta = np.diag([1.0] * (dimension - 1) + [-1.0])
    zero_gamma = np.zeros((dimension,) * 3)
    zero_ric = np.zeros((dimension, dimension))
    return MetricModel(
        name="minkowski",
        dimension=dimension,
        metric=lambda x: eta.copy(),
        domain=lambda x: bool(np.all(np.isfinite(x))),
        christoffel=lambda x: zero_gamma.copy(),
        ricci=lambda x: zero_ric.copy(),
        scalar=lambda x: 0.0,
    )


def minkowski_halfspace(dimension: int = 4) -> MetricModel:
    """Flat metric restricted to the open half-space t > 0."""
    flat = minkowski(dimension)
    return MetricModel(
        name="minkowski_halfspace",
        dimension=dimension,
        metric=flat.metric,
        domain=lambda x: bool(np.all(np.isfinite(x)) and x[-1] > 0.0),
        margin=lambda x: float(x[-1]),
        christoffel=flat.christoffel,
        ricci=flat.ricci,
        scalar=flat.scalar,
    )


def frw_power(a: float, dimension: int = 4, name=None) -> MetricModel:
    """Warped product t^{2a} sum dx_i^2 - dt^2 on t > 0, scale factor t^a.

    Exact curvature for scale factor S = t^a:
      Gamma^t_{ii}   = a t^{2a-1}
      Gamma^i_{it}   = a / t
      Ric_ii         = (a(a-1) + (n-2) a^2) t^{2a-2}
      Ric_tt         = -(n-1) a (a-1) t^{-2}
      R              = (n-1) a (2(a-1) + (n-2) a) t^{-2}
    """
    n = dimension
    nsp = n - 1
    ric_sp = a * (a - 1.0) + (n - 2) * a * a
    ric_tt = -(n - 1) * a * (a - 1.0)
    r_coef = (n - 1) * a * (2.0 * (a - 1.0) + (n - 2) * a)

    def metric(x):
        t = x[-1]
        g = np.zeros((n, n))
        s2 = t ** (2.0 * a)
        for i in range(nsp):
            g[i, i] = s2
        g[-1, -1] = -1.0
        return g

    def christoffel(x):
        t = x[-1]
        gamma = np.zeros((n, n, n))
        g_tii = a * t ** (2.0 * a - 1.0)
        g_iit = a / t
        for i in range(nsp):
            gamma[-1, i, i] = g_tii
            gamma[i, i, -1] = g_iit
            gamma[i, -1, i] = g_iit
        return gamma

    def ricci(x):
        t = x[-1]
        ric = np.zeros((n, n))
        sp = ric_sp * t ** (2.0 * a - 2.0)
        for i in range(nsp):
            ric[i, i] = sp
        ric[-1, -1] = ric_tt / (t * t)
        return ric

    def scalar(x):
        t = x[-1]
        return r_coef / (t * t)

    return MetricModel(
        name=name or f"frw_power({a})",
        dimension=n,
        metric=metric,
        domain=lambda x: bool(np.all(np.isfinite(x)) and x[-1] > 0.0),
        margin=lambda x: float(x[-1]),
        christoffel=christoffel,
        ricci=ricci,
        scalar=scalar,
    )


def einstein_de_sitter(dimension: int = 4) -> MetricModel:
    """Dust cosmology t^{4/3} sum dx_i^2 - dt^2 on t > 0."""
    return frw_power(2.0 / 3.0, dimension, name="eds")


# ---------------------------------------------------------------------------
# Pointwise operations
# ---------------------------------------------------------------------------

def fd_step(x):
    """Per-coordinate finite-difference step: max(1e-5, 1e-5 |x_i|)."""
    x = np.asarray(x, dtype=float)
    return np.maximum(1e-5, 1e-5 * np.abs(x))


def _require_in_domain(model, x):
    if not model.domain(x):
        raise OutOfDomain(f"{x.tolist()} is outside the domain of {model.name}")


def metric_at(model: MetricModel, x) -> np.ndarray:
    """Evaluate g_ab at x, enforcing symmetry and Lorentz signature."""
    x = as_point(x, model.dimension)
    _require_in_domain(model, x)
    g = np.asarray(model.metric(x), dtype=float)
    if g.shape != (model.dimension, model.dimension):
        raise GeometryError(f"metric of {model.name} has shape {g.shape}")
    if not np.allclose(g, g.T, rtol=1e-12, atol=1e-12):
        raise SignatureError(f"metric of {model.name} is not symmetric at {x.tolist()}")
    g = 0.5 * (g + g.T)
    eigs = np.linalg.eigvalsh(g)
    if int(np.sum(eigs < 0.0)) != 1 or int(np.sum(eigs > 0.0)) != model.dimension - 1:
        raise SignatureError(
            f"metric of {model.name} has eigenvalue signs {np.sign(eigs).tolist()} at {x.tolist()}")
    return g


def inverse_metric(g) -> np.ndarray:
    """Invert a metric matrix, refusing ill-conditioned inputs."""
    eigs = np.linalg.eigvalsh(g)
    amax, amin = np.max(np.abs(eigs)), np.min(np.abs(eigs))
    if amin == 0.0 or amax / amin > COND_LIMIT:
        raise DegenerateMetric(f"metric condition number exceeds {COND_LIMIT:g}")
    return np.linalg.inv(g)


def _metric_partials(model, x, h):
    """dg[d, b, c] = d g_bc / d x^d by central differences (step h per axis)."""
    n = model.dimension
    dg = np.empty((n, n, n))
    for d in range(n):
        xp = x.copy()
        xm = x.copy()
        xp[d] += h[d]
        xm[d] -= h[d]
        for probe in (xp, xm):
            if not model.domain(probe):
                raise OutOfDomain(
                    f"finite-difference stencil leaves the domain of {model.name} near {x.tolist()}")
        dg[d] = (np.asarray(model.metric(xp), dtype=float)
                 - np.asarray(model.metric(xm), dtype=float)) / (2.0 * h[d])
    return dg


def _christoffel_fd(model, x, h):
    g = np.asarray(model.metric(x), dtype=float)
    ginv = inverse_metric(0.5 * (g + g.T))
    dg = _metric_partials(model, x, h)
    # T[d,b,c] = d_b g_dc + d_c g_db - d_d g_bc
    t = np.transpose(dg, (1, 0, 2)) + np.transpose(dg, (1, 2, 0)) - dg
    gamma = 0.5 * np.einsum("ad,dbc->abc", ginv, t)
    return 0.5 * (gamma + np.transpose(gamma, (0, 2, 1)))


def christoffel_at(model: MetricModel, x, h=None) -> np.ndarray:
    """Levi-Civita connection coefficients Gamma^a_bc at x.

    Uses the exact builtin evaluator when present, otherwise second-order
    central differences of the metric with per-coordinate step ``h``.
    """
    x = as_point(x, model.dimension)
    _require_in_domain(model, x)
    if model.christoffel is not None:
        gamma = np.asarray(model.christoffel(x), dtype=float)
        return 0.5 * (gamma + np.transpose(gamma, (0, 2, 1)))
    step = fd_step(x) if h is None else np.full(model.dimension, float(h))
    return _christoffel_fd(model, x, step)


def ricci_at(model: MetricModel, x, h=None) -> np.ndarray:
    """Ricci tensor Ric_ab at x (exact for builtins, nested central FD else)."""
    x = as_point(x, model.dimension)
    _require_in_domain(model, x)
    if model.ricci is not None:
        ric = np.asarray(model.ricci(x), dtype=float)
        return 0.5 * (ric + ric.T)
    n = model.dimension
    step = fd_step(x) if h is None else np.full(n, float(h))
    gamma = _christoffel_fd(model, x, step)
    dgamma = np.empty((n, n, n, n))  # dgamma[d] = d Gamma / d x^d
    for d in range(n):
        xp = x.copy()
        xm = x.copy()
        xp[d] += step[d]
        xm[d] -= step[d]
        for probe in (xp, xm):
            if not model.domain(probe):
                raise OutOfDomain(
                    f"curvature stencil leaves the domain of {model.name} near {x.tolist()}")
        dgamma[d] = (_christoffel_fd(model, xp, step)
                     - _christoffel_fd(model, xm, step)) / (2.0 * step[d])
    term1 = np.einsum("aabc->bc", dgamma)
    term2 = np.einsum("baac->bc", dgamma)
    trace = np.einsum("aad->d", gamma)
    term3 = np.einsum("d,dbc->bc", trace, gamma)
    term4 = np.einsum("abd,dac->bc", gamma, gamma)
    ric = term1 - term2 + term3 - term4
    return 0.5 * (ric + ric.T)


def scalar_curvature_at(model: MetricModel, x, h=None) -> float:
    """Scalar curvature R = g^{ab} Ric_ab at x."""
    x = as_point(x, model.dimension)
    _require_in_domain(model, x)
    if model.scalar is not None:
        return float(model.scalar(x))
    g = metric_at(model, x)
    return float(np.einsum("ab,ab->", inverse_metric(g), ricci_at(model, x, h)))


def null_project(model: MetricModel, x, v) -> np.ndarray:
    """Rescale the time component of v so that g(v, v) = 0.

    The spatial part and the time-orientation sign are preserved (a zero time
    component is projected onto the future cone).
    """
    x = as_point(x, model.dimension)
    v = as_point(v, model.dimension)
    w = v[:-1]
    if np.linalg.norm(w) == 0.0:
        raise ZeroSpatialPart("cannot null-project a vector with zero spatial part")
    g = metric_at(model, x)
    aa = g[-1, -1]
    bb = 2.0 * float(g[-1, :-1] @ w)
    cc = float(w @ g[:-1, :-1] @ w)
    disc = bb * bb - 4.0 * aa * cc
    if disc < 0.0:
        raise GeometryError("no real null rescaling exists (spatial part not spacelike)")
    sq = np.sqrt(disc)
    roots = ((-bb + sq) / (2.0 * aa), (-bb - sq) / (2.0 * aa))
    sign = np.sign(v[-1]) if v[-1] != 0.0 else 1.0
    vt = max(roots) if sign > 0 else min(roots)
    out = v.copy()
    out[-1] = vt
    return out


def einstein_residual_at(model: MetricModel, x, h=None) -> float:
    """Max-entry deviation of Ric from (R/n) g at x; zero iff Einstein there."""
    x = as_point(x, model.dimension)
    g = metric_at(model, x)
    ric = ricci_at(model, x, h)
    r = float(np.einsum("ab,ab->", inverse_metric(g), ric))
    return float(np.max(np.abs(ric - (r / model.dimension) * g)))


def null_norm(model: MetricModel, x, v) -> float:
    """g(v, v) at x (no null check)."""
    g = metric_at(model, x)
    v = as_point(v, model.dimension)
    return float(v @ g @ v)


def ncc_at(model: MetricModel, x, X, tol: float = NULL_TOL) -> float:
    """Ric(X, X) at x for a null vector X; raises NotNull otherwise."""
    x = as_point(x, model.dimension)
    X = as_point(X, model.dimension)
    scale = max(1.0, float(X @ X))
    if abs(null_norm(model, x, X)) > tol * scale:
        raise NotNull(f"g(X,X) = {null_norm(model, x, X):g} is not null within {tol:g}")
    ric = ricci_at(model, x)
    return float(X @ ric @ X)


@dataclass(frozen=True)
class SampleSpec:
    """Point/direction sampling for condition checks.

    Points are drawn uniformly from the box [lo, hi] and rejected when outside
    the model domain; each keeps ``directions`` random null directions.
    """

    count: int = 100
    directions: int = 4
    seed: int = 0
    lo: tuple = (-2.0, -2.0, -2.0, 0.2)
    hi: tuple = (2.0, 2.0, 2.0, 5.0)
    tolerance: float = 1e-10


@dataclass(frozen=True)
class ConditionReport:
    passed: bool
    min_value: float
    samples: int
    witness_point: Optional[tuple] = None
    witness_vector: Optional[tuple] = None


def check_ncc(model: MetricModel, sampling: SampleSpec = SampleSpec()) -> ConditionReport:
    """Sample Ric(X, X) over random null vectors; fail on any value < -tol."""
    rng = np.random.default_rng(sampling.seed)
    lo = np.asarray(sampling.lo, dtype=float)
    hi = np.asarray(sampling.hi, dtype=float)
    if lo.size != model.dimension:
        raise EmptySample(f"sampling box has {lo.size} coordinates, model has {model.dimension}")
    best = np.inf
    witness = None
    used = 0
    attempts = 0
    while used < sampling.count and attempts < 50 * sampling.count:
        attempts += 1
        x = lo + (hi - lo) * rng.random(model.dimension)
        if not model.domain(x):
            continue
        ric = ricci_at(model, x)
        for _ in range(sampling.directions):
            w = rng.standard_normal(model.dimension - 1)
            if np.linalg.norm(w) < 1e-12:
                continue
            v = np.concatenate([w / np.linalg.norm(w), [rng.choice([-1.0, 1.0])]])
            v = null_project(model, x, v)
            value = float(v @ ric @ v)
            if value < best:
                best = value
                witness = (x.copy(), v.copy())
        used += 1
    if used == 0:
        raise EmptySample("no in-domain points found in the sampling box")
    passed = best >= -sampling.tolerance
    return ConditionReport(
        passed=passed,
        min_value=best,
        samples=used,
        witness_point=None if passed else tuple(witness[0]),
        witness_vector=None if passed else tuple(witness[1]),
    )

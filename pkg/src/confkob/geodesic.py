"""Null geodesic shooting with adaptive steps and incompleteness detection.

Trajectories are integrated with an embedded Runge-Kutta 5(4) pair in both
parameter directions from the shoot point, keeping every accepted step's
dense-output interpolant.  An end terminates with one of three flags:

  DOMAIN_EXIT    the adaptive step collapsed below ``min_step`` with the
                 domain predicate failing just ahead; the exit parameter is
                 bracketed by bisection on the predicate.
  STEP_COLLAPSE  the step collapsed with no domain boundary in sight.
  BUDGET_REACHED the affine budget was exhausted.  Completeness is only ever
                 asserted "up to budget".
"""

from __future__ import annotations

import bisect
import csv
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from scipy.integrate import RK45
from scipy.optimize import minimize_scalar
from scipy.interpolate import CubicHermiteSpline

from . import manifold
from .errors import GeometryError, ImmediateExit, NotNull
from .manifold import as_point

NULL_DRIFT_BOUND = 1e-8


class EndFlag(str, Enum):
    DOMAIN_EXIT = "DomainExit"
    STEP_COLLAPSE = "StepCollapse"
    BUDGET_REACHED = "BudgetReached"


@dataclass(frozen=True)
class ShootSpec:
    """Initial data and step control for a null geodesic shoot."""

    start: tuple
    direction: tuple
    rtol: float = 1e-10
    atol: float = 1e-12
    affine_budget: float = 50.0
    min_step: float = 1e-10
    max_step: float = np.inf

    def __post_init__(self):
        if not (self.affine_budget > 0.0 and self.min_step > 0.0):
            raise GeometryError("affine_budget and min_step must be positive")


class GeodesicTrajectory:
    """Dense-output null geodesic over its maximal integrated domain.

    ``state(s)`` returns (x, v) for any s in [s_minus, s_plus]; ``nodes``
    holds the accepted step endpoints (clustered toward incomplete ends).
    """

    def __init__(self, model, segments, nodes, end_flags, exit_params,
                 null_drift, spec):
        self.model = model
        self.segments = segments            # list of (lo, hi, interpolant)
        self._bounds = [seg[0] for seg in segments]
        self.nodes = np.asarray(nodes, dtype=float)
        self.end_flags = end_flags          # {"minus": EndFlag, "plus": EndFlag}
        self.exit_params = exit_params      # {"minus": float|None, "plus": float|None}
        self.null_drift = null_drift
        self.spec = spec
        self.s_minus = segments[0][0]
        self.s_plus = segments[-1][1]
        self._cache = {}

    def state(self, s):
        s = float(s)
        if s < self.s_minus - 1e-9 or s > self.s_plus + 1e-9:
            raise GeometryError(
                f"s = {s} outside trajectory domain [{self.s_minus}, {self.s_plus}]")
        s = min(max(s, self.s_minus), self.s_plus)
        i = bisect.bisect_right(self._bounds, s) - 1
        i = min(max(i, 0), len(self.segments) - 1)
        y = self.segments[i][2](s)
        n = self.model.dimension
        return y[:n].copy(), y[n:].copy()

    def position(self, s):
        return self.state(s)[0]

    def velocity(self, s):
        return self.state(s)[1]

    def __call__(self, s):
        return self.state(s)


class _ConstantSegment:
    """Degenerate dense output for a zero-length direction."""

    def __init__(self, y):
        self.y = np.asarray(y, dtype=float)

    def __call__(self, s):
        return self.y.copy()


def _geodesic_rhs(model):
    n = model.dimension
    christoffel = model.christoffel
    if christoffel is None:
        def christoffel(x):  # finite-difference fallback
            return manifold.christoffel_at(model, x)

    nan = np.full(2 * n, np.nan)

    def rhs(s, y):
        x = y[:n]
        if not model.domain(x):
            return nan
        gamma = christoffel(x)
        v = y[n:]
        acc = -np.einsum("abc,b,c->a", gamma, v, v)
        return np.concatenate([v, acc])

    return rhs


def _bisect_exit(domain, x_end, v_end, d_lo, d_hi, tol=1e-10):
    """Bisect the domain predicate along the linear continuation x + d v."""
    for _ in range(200):
        if d_hi - d_lo <= tol:
            break
        mid = 0.5 * (d_lo + d_hi)
        if domain(x_end + mid * v_end):
            d_lo = mid
        else:
            d_hi = mid
    return 0.5 * (d_lo + d_hi)


def _integrate_direction(model, x0, v0, sign, spec):
    """Run one parameter direction; returns (segments, nodes, flag, exit_s, drift)."""
    n = model.dimension
    rhs = _geodesic_rhs(model)
    g0 = manifold.metric_at(model, x0)
    y = np.concatenate([x0, v0])
    s = 0.0
    segments = []
    nodes = []
    drift_max = 0.0
    flag = None
    exit_s = None
    max_steps = 100_000

    while flag is None and max_steps > 0:
        solver = RK45(rhs, s, y, t_bound=sign * spec.affine_budget,
                      rtol=spec.rtol, atol=spec.atol, max_step=spec.max_step)
        reproject = False
        while flag is None and not reproject:
            max_steps -= 1
            if max_steps <= 0:
                flag = EndFlag.STEP_COLLAPSE
                break
            if solver.status == "finished":
                flag = EndFlag.BUDGET_REACHED
                break
            try:
                solver.step()
            except Exception:
                flag = EndFlag.STEP_COLLAPSE
                break
            if solver.status == "failed":
                # scipy gave up shrinking; classify like a collapsed step below
                x_end, v_end = y[:n], y[n:]
                flag = _classify_collapse(model, x_end, v_end, sign, spec)
                if flag is EndFlag.DOMAIN_EXIT:
                    exit_s = s + sign * _probe_exit(model, x_end, v_end, sign, spec)
                break
            h_used = abs(solver.t - s)
            s = solver.t
            y = solver.y.copy()
            segments.append((solver.t_old, solver.t, solver.dense_output()))
            nodes.append(s)
            # null constraint maintenance
            x_now, v_now = y[:n], y[n:]
            g = model.metric(x_now)
            gvv = float(v_now @ g @ v_now)
            scale = max(1.0, float(v_now @ v_now))
            drift_max = max(drift_max, abs(gvv) / scale)
            if abs(gvv) > 0.5 * NULL_DRIFT_BOUND * scale:
                y = np.concatenate([x_now, manifold.null_project(model, x_now, v_now)])
                reproject = True
            if solver.status == "running" and h_used < spec.min_step:
                # Zeno guard: creeping toward something; decide what
                flag = _classify_collapse(model, x_now, v_now, sign, spec)
                if flag is EndFlag.DOMAIN_EXIT:
                    exit_s = s + sign * _probe_exit(model, x_now, v_now, sign, spec)
                break
            if solver.status == "finished":
                flag = EndFlag.BUDGET_REACHED
                break
    if not segments:
        segments = [(0.0, 0.0, _ConstantSegment(np.concatenate([x0, v0])))]
        nodes = [0.0]
    return segments, nodes, flag, exit_s, drift_max


def _probe_distances(spec):
    d = spec.min_step
    while d <= spec.affine_budget:
        yield d
        d *= 4.0


def _classify_collapse(model, x_end, v_end, sign, spec):
    for d in _probe_distances(spec):
        if not model.domain(x_end + sign * d * v_end):
            return EndFlag.DOMAIN_EXIT
    return EndFlag.STEP_COLLAPSE


def _probe_exit(model, x_end, v_end, sign, spec):
    d_out = None
    for d in _probe_distances(spec):
        if not model.domain(x_end + sign * d * v_end):
            d_out = d
            break
    return _bisect_exit(model.domain, x_end, sign * v_end, 0.0, d_out)


TANGENCY_TOL = 1e-9


def _boundary_tangencies(traj):
    """Parameters where the trajectory touches the domain boundary without
    crossing it.

    A tangential contact leaves the domain predicate true at every sample, so
    the integrator sails through what is actually a boundary point and glues
    two distinct geodesics together.  We catch it by scanning the model's
    margin gauge at the accepted step nodes for interior local minima and
    refining each candidate dip to machine resolution.
    """
    margin = traj.model.margin
    nodes = traj.nodes
    vals = np.array([margin(traj.position(s)) for s in nodes])
    scale = max(1.0, float(vals[int(np.argmin(np.abs(nodes)))]))
    if float(vals.min()) >= 1e-2 * scale:
        return []
    found = []
    for i in range(1, len(nodes) - 1):
        if vals[i] < vals[i - 1] and vals[i] <= vals[i + 1] \
                and vals[i] < 1e-2 * scale:
            res = minimize_scalar(
                lambda s: margin(traj.position(s)),
                bounds=(float(nodes[i - 1]), float(nodes[i + 1])),
                method="bounded")
            if float(res.fun) <= TANGENCY_TOL * scale:
                found.append(float(res.x))
    return found


def _truncated(traj, s_t, side):
    end_flags = dict(traj.end_flags)
    exit_params = dict(traj.exit_params)
    end_flags[side] = EndFlag.DOMAIN_EXIT
    exit_params[side] = s_t
    if side == "plus":
        segments = [seg for seg in traj.segments if seg[0] < s_t]
        lo, _, interp = segments[-1]
        segments[-1] = (lo, s_t, interp)
        nodes = [s for s in traj.nodes if s < s_t] + [s_t]
    else:
        segments = [seg for seg in traj.segments if seg[1] > s_t]
        _, hi, interp = segments[0]
        segments[0] = (s_t, hi, interp)
        nodes = [s_t] + [s for s in traj.nodes if s > s_t]
    return GeodesicTrajectory(
        model=traj.model, segments=segments, nodes=nodes,
        end_flags=end_flags, exit_params=exit_params,
        null_drift=traj.null_drift, spec=traj.spec)


def shoot(model: manifold.MetricModel, spec: ShootSpec) -> GeodesicTrajectory:
    """Integrate the affinely parametrized null geodesic through spec.start.

    The initial direction must already be null (within tolerance); the
    constraint is re-projected whenever drift exceeds half the allowed bound.
    """
    x0 = as_point(spec.start, model.dimension)
    v0 = as_point(spec.direction, model.dimension)
    if not model.domain(x0):
        raise ImmediateExit(f"start {x0.tolist()} is not interior to the domain")
    g = manifold.metric_at(model, x0)
    gvv = float(v0 @ g @ v0)
    if abs(gvv) > NULL_DRIFT_BOUND * max(1.0, float(v0 @ v0)):
        raise NotNull(f"initial direction has g(v,v) = {gvv:g}")

    fw_segments, fw_nodes, fw_flag, fw_exit, fw_drift = _integrate_direction(
        model, x0, v0, +1.0, spec)
    bw_segments, bw_nodes, bw_flag, bw_exit, bw_drift = _integrate_direction(
        model, x0, v0, -1.0, spec)

    # merge: backward segments run from 0 downward; normalize each to lo < hi
    segments = []
    for t_old, t_new, interp in reversed(bw_segments):
        lo, hi = sorted((t_old, t_new))
        segments.append((lo, hi, interp))
    for t_old, t_new, interp in fw_segments:
        lo, hi = sorted((t_old, t_new))
        segments.append((lo, hi, interp))
    nodes = sorted(set([0.0] + fw_nodes + bw_nodes))
    traj = GeodesicTrajectory(
        model=model,
        segments=segments,
        nodes=nodes,
        end_flags={"minus": bw_flag, "plus": fw_flag},
        exit_params={"minus": bw_exit, "plus": fw_exit},
        null_drift=max(fw_drift, bw_drift),
        spec=spec,
    )
    if model.margin is not None:
        contacts = _boundary_tangencies(traj)
        s_plus = min((s for s in contacts if s > 0.0), default=None)
        s_minus = max((s for s in contacts if s < 0.0), default=None)
        if s_plus is not None:
            traj = _truncated(traj, s_plus, "plus")
        if s_minus is not None:
            traj = _truncated(traj, s_minus, "minus")
    return traj


def shoot_null(model, start, spatial_direction, time_sign=+1.0, **kwargs) -> GeodesicTrajectory:
    """Convenience: null-project a spatial direction at start and shoot."""
    start = as_point(start, model.dimension)
    w = np.asarray(spatial_direction, dtype=float)
    v = np.concatenate([w, [float(time_sign)]])
    v = manifold.null_project(model, start, v)
    return shoot(model, ShootSpec(start=tuple(start), direction=tuple(v), **kwargs))


class SplineTrajectory:
    """Trajectory backed by a Hermite spline through sampled states.

    Used to wrap analytic or imported curves in the trajectory interface so
    that diagnostics (residuals, projective parameters) apply to them too.
    """

    def __init__(self, model, s_values, positions, velocities,
                 end_flags=None, exit_params=None):
        self.model = model
        self.nodes = np.asarray(s_values, dtype=float)
        self.s_minus = float(self.nodes[0])
        self.s_plus = float(self.nodes[-1])
        self._x = CubicHermiteSpline(self.nodes, np.asarray(positions, float),
                                     np.asarray(velocities, float), axis=0)
        self._v = self._x.derivative()
        self.end_flags = end_flags or {"minus": EndFlag.STEP_COLLAPSE,
                                       "plus": EndFlag.STEP_COLLAPSE}
        self.exit_params = exit_params or {"minus": None, "plus": None}
        self.null_drift = float("nan")
        self._cache = {}

    @classmethod
    def from_callable(cls, model, fn, span, samples=400, derivative=None, **kwargs):
        s = np.linspace(span[0], span[1], samples)
        xs = np.array([as_point(fn(si), model.dimension) for si in s])
        if derivative is None:
            h = (span[1] - span[0]) / (40.0 * samples)
            vs = np.array([(as_point(fn(si + h), model.dimension)
                            - as_point(fn(si - h), model.dimension)) / (2 * h) for si in s])
        else:
            vs = np.array([as_point(derivative(si), model.dimension) for si in s])
        return cls(model, s, xs, vs, **kwargs)

    def state(self, s):
        s = float(s)
        if s < self.s_minus - 1e-9 or s > self.s_plus + 1e-9:
            raise GeometryError(f"s = {s} outside trajectory domain")
        s = min(max(s, self.s_minus), self.s_plus)
        return self._x(s), self._v(s)

    def position(self, s):
        return self.state(s)[0]

    def velocity(self, s):
        return self.state(s)[1]

    def __call__(self, s):
        return self.state(s)


def _interior_samples(trajectory, count, margin=1e-6):
    lo, hi = trajectory.s_minus, trajectory.s_plus
    pad = margin * max(1.0, hi - lo)
    return np.linspace(lo + pad, hi - pad, count)


def geodesic_residual(model, trajectory, sample_count: int = 64,
                      span=None) -> float:
    """Max over samples of ||x'' + Gamma(x', x')||, x'' by dense differentiation.

    ``span`` restricts sampling to a sub-window; by default a small relative
    margin is kept away from the ends (where incomplete trajectories may have
    unbounded derivatives and the difference quotient loses meaning).
    """
    if span is None:
        lo, hi = trajectory.s_minus, trajectory.s_plus
        pad = 1e-3 * (hi - lo)
        span = (lo + pad, hi - pad)
    h = max(1e-7, 1e-6 * (span[1] - span[0]))
    worst = 0.0
    for s in np.linspace(span[0], span[1], sample_count):
        x, v = trajectory.state(s)
        vp = trajectory.velocity(min(s + h, trajectory.s_plus))
        vm = trajectory.velocity(max(s - h, trajectory.s_minus))
        acc = (vp - vm) / (2.0 * h)
        gamma = manifold.christoffel_at(model, x)
        res = acc + np.einsum("abc,b,c->a", gamma, v, v)
        worst = max(worst, float(np.linalg.norm(res)))
    return worst


def curve_geodesic_residual(model, fn, span, sample_count: int = 32,
                            h: float = 1e-4) -> float:
    """Residual of an arbitrary coordinate curve against the geodesic equation.

    Derivatives come from five-point central differences of ``fn``; use this
    to test closed-form candidates without integrating anything.
    """
    lo, hi = span
    worst = 0.0
    for s in np.linspace(lo, hi, sample_count):
        f = [as_point(fn(s + k * h), model.dimension) for k in (-2, -1, 0, 1, 2)]
        v = (f[0] - 8 * f[1] + 8 * f[3] - f[4]) / (12.0 * h)
        acc = (-f[0] + 16 * f[1] - 30 * f[2] + 16 * f[3] - f[4]) / (12.0 * h * h)
        gamma = manifold.christoffel_at(model, f[2])
        res = acc + np.einsum("abc,b,c->a", gamma, v, v)
        worst = max(worst, float(np.linalg.norm(res)))
    return worst


def maximal_affine_domain(trajectory):
    """(s_minus, s_plus, past_complete, future_complete).

    An end counts as complete only in the "up to budget" sense: its flag is
    BUDGET_REACHED.  DomainExit / StepCollapse ends are incomplete with
    finite affine extent.
    """
    past = trajectory.end_flags["minus"] is EndFlag.BUDGET_REACHED
    future = trajectory.end_flags["plus"] is EndFlag.BUDGET_REACHED
    return trajectory.s_minus, trajectory.s_plus, past, future


def _ngc_sample_grid(trajectory, count):
    """Uniform grid plus geometric refinement toward incomplete ends."""
    lo, hi = trajectory.s_minus, trajectory.s_plus
    span = hi - lo
    base = list(np.linspace(lo + 1e-6 * span, hi - 1e-6 * span, count // 2))
    extra = count - len(base)
    per_end = max(extra // 2, 1)
    ladder = span * 0.25 * 0.5 ** np.arange(1, per_end + 1)
    if trajectory.end_flags["minus"] is not EndFlag.BUDGET_REACHED:
        base.extend(lo + ladder)
    if trajectory.end_flags["plus"] is not EndFlag.BUDGET_REACHED:
        base.extend(hi - ladder)
    return np.clip(sorted(base), lo, hi)


def ngc_along(model, trajectory, tol: float = 1e-10, samples: int = 512):
    """Null generic condition along one trajectory.

    Returns (holds, witness_s): holds iff |Ric(x', x')| exceeds tol at some
    sampled parameter, with sampling clustered toward incomplete ends where
    curvature may blow up.
    """
    for s in _ngc_sample_grid(trajectory, samples):
        x, v = trajectory.state(s)
        ric = manifold.ricci_at(model, x)
        if abs(float(v @ ric @ v)) > tol:
            return True, float(s)
    return False, None


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------

def export_trajectory_csv(trajectory, path, sidecar_path=None, samples=512,
                          model_spec=None, projective=None):
    """Write the trajectory as CSV (s, coordinates, velocities, null residual).

    End flags (and optionally the model spec) go to a JSON sidecar.  When a
    projective parameter is supplied, u1/u2/p columns are appended.
    """
    n = trajectory.model.dimension
    names = [f"x{i + 1}" for i in range(n - 1)] + ["t"]
    header = ["s"] + names + [f"d{c}" for c in names] + ["null_residual"]
    if projective is not None:
        header += ["u1", "u2", "p"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for s in _interior_samples(trajectory, samples, margin=0.0):
            x, v = trajectory.state(s)
            g = manifold.metric_at(trajectory.model, x)
            row = [repr(float(s))] + [repr(float(c)) for c in x] \
                + [repr(float(c)) for c in v] + [repr(float(v @ g @ v))]
            if projective is not None:
                u1, u2 = projective.u(s)
                p = u1 / u2 if u2 != 0.0 else float("inf")
                row += [repr(float(u1)), repr(float(u2)), repr(float(p))]
            writer.writerow(row)
    if sidecar_path is not None:
        sidecar = {
            "end_flags": {k: v.value for k, v in trajectory.end_flags.items()},
            "exit_params": trajectory.exit_params,
            "null_drift": trajectory.null_drift,
            "s_minus": trajectory.s_minus,
            "s_plus": trajectory.s_plus,
        }
        if model_spec is not None:
            sidecar["model"] = model_spec
        with open(sidecar_path, "w") as fh:
            json.dump(sidecar, fh, indent=2, sort_keys=True)

"""Admissible-region machinery in wind-injection space.

Membership of a WPI point is the full pipeline verdict at the AGC-lifted
injection. Boundary points are located by bisection along rays from a stable
seed (the stable set along a ray is assumed hole-free, with an optional
dense diagnostic scan that fails loudly if the assumption breaks). Around a
located bifurcation point the boundary is approximated by a quadratic
surface; eliminating the SG coordinates through the AGC relation turns the
extended-space surface into a pure WPI-space quadric whose sign classifies
points without any further eigen-analysis.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (
    DegenerateEigenvalue,
    FlatDirection,
    InfeasibleSteadyState,
    LimitViolation,
    NoCrossing,
    NonConvergence,
    NumericalFailure,
    OutsideTrustRadiusWarning,
    RegionHole,
    SingularAlgebraicBlock,
    ZeroDirection,
)
from .netcase import NetworkCase, Tolerances
from .pipeline import as_policy, lift_wpi, reduced_at
from .powerflow import InjectionVector
from .spectra import (
    StabilityVerdict,
    check_simple_critical,
    eigen_analysis,
    inadmissible_verdict,
    singular_verdict,
    stability_verdict,
)


def _evaluate_injection(case, inj, tol):
    """(verdict, summary-or-None) for a fully specified injection."""
    try:
        red = reduced_at(case, inj, tol)
    except NonConvergence:
        return inadmissible_verdict("PowerFlowDiverged"), None
    except InfeasibleSteadyState:
        return inadmissible_verdict("InfeasibleSteadyState"), None
    except SingularAlgebraicBlock as exc:
        return singular_verdict(exc.rcond), None
    summary = eigen_analysis(red)
    return stability_verdict(summary, tol.margin_tol), summary


def evaluate_wpi_point(case: NetworkCase, gamma, anchor: InjectionVector,
                       p_w, tolerances: Tolerances = None) -> StabilityVerdict:
    """Membership test of a WPI vector under the given AGC factors.

    Lifts p_w onto the extended injection space (wind deviation compensated
    by the SGs), solves the power flow and classifies the equilibrium.
    Power-flow divergence and box-limit violations come back as Inadmissible
    verdicts with a cause, distinct from Unstable.
    """
    tol = tolerances or Tolerances()
    try:
        inj = lift_wpi(case, gamma, anchor, p_w)
    except LimitViolation as exc:
        return inadmissible_verdict(f"LimitViolation:{exc.unit_kind}"
                                    f"{exc.index}:{exc.bound}")
    verdict, _ = _evaluate_injection(case, inj, tol)
    return verdict


def evaluate_extended_point(case: NetworkCase, p_e,
                            tolerances: Tolerances = None) -> StabilityVerdict:
    """Direct extended-space verdict at injection vector p_e (no lift)."""
    tol = tolerances or Tolerances()
    inj = InjectionVector.from_extended(p_e, case.n_sg)
    verdict, _ = _evaluate_injection(case, inj, tol)
    return verdict


def extended_max_real(case: NetworkCase, p_e,
                      tolerances: Tolerances = None) -> float:
    """Stability field R(p_e): max real part of the deflated spectrum.

    Box limits are intentionally not applied; this is the smooth surface the
    quadratic approximation differentiates.
    """
    tol = tolerances or Tolerances()
    inj = InjectionVector.from_extended(p_e, case.n_sg)
    red = reduced_at(case, inj, tol)
    return eigen_analysis(red).max_real


# ---------------------------------------------------------------------------
# Ray search
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundaryPoint:
    p_w: np.ndarray
    p_e: np.ndarray
    kind: str                       # HB | SNB | SIB | LIMIT | DIVERGED
    max_real: float                 # nan for LIMIT/DIVERGED/SIB
    critical_eigenvalue: complex
    p_w_start: np.ndarray           # stable ray origin
    p_e_interior: np.ndarray        # lifted stable neighbor of the point
    ray_width: float                # final bracket width (pu)


def ray_boundary_search(case: NetworkCase, gamma, anchor: InjectionVector,
                        start_pw, direction, max_range: float = None,
                        tolerances: Tolerances = None, coarse_steps: int = 24,
                        dense_check: bool = False, dense_step: float = 1e-3,
                        max_bisect: int = 90) -> BoundaryPoint:
    """First admissibility crossing along start + t*direction, t in (0, max_range].

    Marches with coarse steps to bracket the first non-stable point, then
    bisects. For smooth eigenvalue crossings the bisection continues until
    the evaluated midpoint satisfies |max Re(lambda)| <= boundary_tol; jumps
    (box limits, power-flow divergence, algebraic singularity) terminate on
    bracket width and are labeled accordingly. Raises NoCrossing if the whole
    range stays stable.
    """
    tol = tolerances or Tolerances()
    gamma = as_policy(gamma)
    start_pw = np.asarray(start_pw, dtype=float)
    direction = np.asarray(direction, dtype=float)
    nrm = np.linalg.norm(direction)
    if nrm == 0.0:
        raise ZeroDirection("ray direction has zero norm")
    direction = direction / nrm
    if max_range is None:
        max_range = _range_to_box(case, start_pw, direction) + 10.0 * tol.ray_tol
    if max_range <= 0:
        raise NoCrossing("empty search range")

    def probe(t):
        return evaluate_wpi_point(case, gamma, anchor,
                                  start_pw + t * direction, tol)

    v0 = probe(0.0)
    if not v0.is_stable:
        raise ValueError(f"ray start is not stable (status {v0.status})")

    # coarse march for the first non-stable sample
    ts = np.linspace(0.0, max_range, coarse_steps + 1)[1:]
    t_lo, t_hi, v_hi = 0.0, None, None
    for t in ts:
        v = probe(t)
        if v.is_stable:
            t_lo = t
        else:
            t_hi, v_hi = t, v
            break
    if t_hi is None:
        raise NoCrossing(f"stable through the whole range {max_range:.4g} pu")

    # bisection
    t_mid, v_mid = t_hi, v_hi
    for _ in range(max_bisect):
        width = t_hi - t_lo
        if (np.isfinite(v_mid.max_real)
                and abs(v_mid.max_real) <= tol.boundary_tol
                and width <= tol.ray_tol):
            break
        if width <= 1e-13:
            t_mid, v_mid = t_hi, v_hi
            break
        t_mid = 0.5 * (t_lo + t_hi)
        v_mid = probe(t_mid)
        if v_mid.is_stable:
            t_lo = t_mid
        else:
            t_hi, v_hi = t_mid, v_mid

    bp = _make_boundary_point(case, gamma, anchor, start_pw, direction,
                              t_lo, t_mid, v_mid, tol)
    if dense_check:
        _dense_scan(probe, t_lo, dense_step)
    return bp


def _range_to_box(case, start, d):
    """Distance along d until some wind coordinate exits [0, capacity]."""
    t_exit = np.inf
    for j, wf in enumerate(case.wind_farms):
        if d[j] > 0:
            t_exit = min(t_exit, (wf.capacity - start[j]) / d[j])
        elif d[j] < 0:
            t_exit = min(t_exit, (0.0 - start[j]) / d[j])
    if not np.isfinite(t_exit):
        t_exit = 10.0 * max(wf.capacity for wf in case.wind_farms)
    return max(t_exit, 0.0)


def _make_boundary_point(case, gamma, anchor, start, d, t_lo, t_star, verdict,
                         tol):
    p_w = start + t_star * d
    p_w_in = start + t_lo * d
    p_e_interior = lift_wpi(case, gamma, anchor, p_w_in,
                            check_limits=False).p_e
    p_e = lift_wpi(case, gamma, anchor, p_w, check_limits=False).p_e

    if verdict.status == "SingularAlgebraic":
        kind, mr, lam = "SIB", float("nan"), complex("nan")
    elif verdict.status == "Inadmissible":
        cause = verdict.cause or ""
        kind = "LIMIT" if cause.startswith("LimitViolation") else "DIVERGED"
        mr, lam = float("nan"), complex("nan")
    else:
        inj = lift_wpi(case, gamma, anchor, p_w, check_limits=False)
        summary = eigen_analysis(reduced_at(case, inj, tol))
        mr = summary.max_real
        lam = summary.critical_eigenvalue
        kind = "HB" if abs(lam.imag) > 1e-6 else "SNB"
    return BoundaryPoint(p_w=p_w, p_e=p_e, kind=kind, max_real=mr,
                         critical_eigenvalue=lam, p_w_start=np.array(start),
                         p_e_interior=p_e_interior,
                         ray_width=float(t_star - t_lo))


def _dense_scan(probe, t_end, step):
    """Diagnostic hole scan over the supposedly stable segment."""
    if t_end <= 0:
        return
    for t in np.arange(step, t_end, step):
        if not probe(t).is_stable:
            raise RegionHole(f"unstable pocket at ray parameter {t:.6g}")


# ---------------------------------------------------------------------------
# Quadratic boundary approximation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadraticBoundary:
    """Implicit quadric residual(p) = g.(p-p0) + (p-p0)'H(p-p0)/2.

    Oriented so the stable side is negative. ``space`` tags whether p lives
    in the extended injection space or the WPI space. The graph-form
    coefficients of the dependent first coordinate are recoverable through
    dependent_gradient / dependent_hessian.
    """

    p0: np.ndarray
    grad: np.ndarray
    hess: np.ndarray
    space: str                      # "extended" | "wpi"
    trust_radius: float

    def __post_init__(self):
        object.__setattr__(self, "p0", np.asarray(self.p0, dtype=float))
        object.__setattr__(self, "grad", np.asarray(self.grad, dtype=float))
        h = np.asarray(self.hess, dtype=float)
        object.__setattr__(self, "hess", 0.5 * (h + h.T))

    def residual_many(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        diff = pts - self.p0[None, :]
        vals = diff @ self.grad + 0.5 * np.einsum(
            "ij,jk,ik->i", diff, self.hess, diff)
        outside = np.linalg.norm(diff, axis=1) > self.trust_radius
        return vals, outside

    def dependent_gradient(self):
        """First partials of coordinate 1 w.r.t. the remaining coordinates."""
        return -self.grad[1:] / self.grad[0]

    def dependent_hessian(self):
        return -self.hess[1:, 1:] / self.grad[0]


def boundary_residual(qb: QuadraticBoundary, p_w) -> float:
    """Signed surface residual; negative on the approximated-stable side."""
    vals, outside = qb.residual_many(p_w)
    if outside[0]:
        warnings.warn("point outside the calibrated trust radius",
                      OutsideTrustRadiusWarning, stacklevel=2)
    return float(vals[0])


def quadratic_from_field(fieldfn: Callable, p0, interior_point,
                         fd_step: float = 1e-5, anchor_step: float = 1e-3,
                         anchor_resid_tol: float = 1e-9,
                         trust_radius: float = np.inf) -> QuadraticBoundary:
    """Quadratic approximation of the zero set of a scalar field at p0.

    First partials of the dependent coordinate come from the implicit
    function theorem applied to central differences of the field; second
    partials are central differences of those first partials evaluated at
    points re-anchored onto the zero set along the dependent coordinate.
    """
    p0 = np.asarray(p0, dtype=float)
    n = p0.size

    def grad_field(p):
        g = np.empty(n)
        for i in range(n):
            pp, pm = p.copy(), p.copy()
            pp[i] += fd_step
            pm[i] -= fd_step
            g[i] = (fieldfn(pp) - fieldfn(pm)) / (2.0 * fd_step)
        return g

    def reanchor(p):
        """Move p along coordinate 0 back onto the zero set (Newton)."""
        q = p.copy()
        for _ in range(40):
            r = fieldfn(q)
            if abs(r) <= anchor_resid_tol:
                return q
            qp, qm = q.copy(), q.copy()
            qp[0] += fd_step
            qm[0] -= fd_step
            dr = (fieldfn(qp) - fieldfn(qm)) / (2.0 * fd_step)
            if dr == 0.0:
                raise FlatDirection("zero slope while re-anchoring")
            step = -r / dr
            step = np.clip(step, -10.0 * anchor_step, 10.0 * anchor_step)
            q[0] += step
        raise NumericalFailure("re-anchoring onto the boundary failed")

    g0 = grad_field(p0)
    scale = np.max(np.abs(g0))
    if abs(g0[0]) <= 1e-10 + 1e-4 * scale:
        raise FlatDirection(
            f"dependent coordinate slope {g0[0]:.3e} too small")
    dep_grad = -g0[1:] / g0[0]

    hess_cols = np.zeros((n - 1, n - 1))
    for i in range(1, n):
        gs = []
        for s in (+1.0, -1.0):
            p = p0.copy()
            p[i] += s * anchor_step
            p[0] += dep_grad[i - 1] * s * anchor_step   # predictor
            p = reanchor(p)
            gp = grad_field(p)
            if abs(gp[0]) <= 1e-10 + 1e-4 * np.max(np.abs(gp)):
                raise FlatDirection("dependent slope vanished off-anchor")
            gs.append(-gp[1:] / gp[0])
        hess_cols[:, i - 1] = (gs[0] - gs[1]) / (2.0 * anchor_step)
    dep_hess = 0.5 * (hess_cols + hess_cols.T)

    grad_impl = np.concatenate([[1.0], -dep_grad])
    hess_impl = np.zeros((n, n))
    hess_impl[1:, 1:] = -dep_hess

    qb = QuadraticBoundary(p0=p0, grad=grad_impl, hess=hess_impl,
                           space="extended", trust_radius=trust_radius)
    interior_val, _ = qb.residual_many(np.asarray(interior_point, dtype=float))
    if interior_val[0] > 0.0:
        qb = QuadraticBoundary(p0=p0, grad=-grad_impl, hess=-hess_impl,
                               space="extended", trust_radius=trust_radius)
    return qb


def quadratic_boundary_extended(case: NetworkCase, gamma, bp: BoundaryPoint,
                                tolerances: Tolerances = None,
                                anchor_step: float = 1e-3,
                                trust_radius: float = None,
                                calibration_directions: int = 6,
                                calibration_seed: int = 0) -> QuadraticBoundary:
    """Quadratic surface through an HB/SNB point in extended injection space.

    The trust radius, unless given, is calibrated by doubling an initial
    radius until predicted boundary points drift more than 5 percent (of
    their distance to the expansion point) from 1-D re-searched truth or
    their field residual exceeds resid_cap.
    """
    tol = tolerances or Tolerances()
    if bp.kind not in ("HB", "SNB"):
        raise ValueError(f"expansion point must be HB/SNB, got {bp.kind}")
    inj = InjectionVector.from_extended(bp.p_e, case.n_sg)
    summary = eigen_analysis(reduced_at(case, inj, tol))
    check_simple_critical(summary, tol.eig_sep_tol)

    def fieldfn(p_e):
        return extended_max_real(case, p_e, tol)

    qb = quadratic_from_field(fieldfn, bp.p_e, bp.p_e_interior,
                              fd_step=tol.sens_step, anchor_step=anchor_step,
                              trust_radius=np.inf)
    if trust_radius is None:
        trust_radius = calibrate_trust_radius(
            qb, fieldfn, tol, start_radius=4.0 * anchor_step,
            n_directions=calibration_directions, seed=calibration_seed)
    return QuadraticBoundary(p0=qb.p0, grad=qb.grad, hess=qb.hess,
                             space="extended", trust_radius=trust_radius)


def calibrate_trust_radius(qb: QuadraticBoundary, fieldfn: Callable,
                           tol: Tolerances, start_radius: float,
                           n_directions: int = 6, seed: int = 0,
                           rel_err_cap: float = 0.05,
                           max_doublings: int = 12) -> float:
    """Double the radius until quadratic predictions stop validating."""
    p0 = qb.p0
    n = p0.size
    dep_grad = qb.dependent_gradient()
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((n_directions, n - 1))
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]

    def predicted_point(u, r):
        p = p0.copy()
        p[1:] += r * u
        delta = np.zeros(n)
        delta[1:] = r * u
        # solve the quadric for the dependent coordinate shift
        dgrad = qb.grad
        dhess = qb.hess
        lin = dgrad[1:] @ delta[1:] + 0.5 * delta[1:] @ dhess[1:, 1:] @ delta[1:]
        p[0] = p0[0] - lin / dgrad[0]
        return p

    def validates(r):
        for u in dirs:
            p_pred = predicted_point(u, r)
            if abs(fieldfn(p_pred)) > tol.resid_cap:
                return False
            try:
                p_true = _root_along_coord0(fieldfn, p_pred, tol,
                                            max_step=max(r, 10 * start_radius))
            except (NumericalFailure, FlatDirection):
                return False
            dist = np.linalg.norm(p_pred - p0)
            if dist == 0.0:
                continue
            if abs(p_pred[0] - p_true[0]) / dist > rel_err_cap:
                return False
        return True

    radius = start_radius
    if not validates(radius):
        return radius
    for _ in range(max_doublings):
        if validates(2.0 * radius):
            radius *= 2.0
        else:
            break
    return radius


def _root_along_coord0(fieldfn, p_seed, tol, max_step, fd_step=1e-6):
    """1-D Newton along coordinate 0 onto the field's zero set."""
    q = np.asarray(p_seed, dtype=float).copy()
    for _ in range(50):
        r = fieldfn(q)
        if abs(r) <= tol.boundary_tol:
            return q
        qp, qm = q.copy(), q.copy()
        qp[0] += fd_step
        qm[0] -= fd_step
        dr = (fieldfn(qp) - fieldfn(qm)) / (2.0 * fd_step)
        if dr == 0.0:
            raise FlatDirection("zero slope in 1-D boundary search")
        q[0] -= np.clip(r / dr, -max_step, max_step)
    raise NumericalFailure("1-D boundary re-search did not converge")


def agc_lift_matrix(gamma, n_wind: int) -> np.ndarray:
    """Linear map T with delta_p_e = T delta_p_w under the AGC relation."""
    g = as_policy(gamma).gamma
    n_sg = g.size
    t = np.zeros((n_sg + n_wind, n_wind))
    t[:n_sg, :] = -g[:, None]
    t[n_sg:, :] = np.eye(n_wind)
    return t


def quadratic_boundary_wpi(qb_ext: QuadraticBoundary,
                           gamma) -> QuadraticBoundary:
    """Eliminate the SG coordinates of an extended-space quadric exactly.

    Substitutes delta_p_s = -gamma * sum(delta_p_w) and collects terms, so
    the returned residual satisfies r_wpi(p_w) = r_ext(lift(p_w)) identically.
    """
    if qb_ext.space != "extended":
        raise ValueError("input surface must live in extended space")
    g = as_policy(gamma).gamma
    n_sg = g.size
    n_wind = qb_ext.p0.size - n_sg
    if n_wind <= 0:
        raise ValueError("gamma length inconsistent with surface dimension")
    t = agc_lift_matrix(g, n_wind)
    grad_w = t.T @ qb_ext.grad
    hess_w = t.T @ qb_ext.hess @ t
    scale = float(np.linalg.norm(t, 2))
    return QuadraticBoundary(p0=qb_ext.p0[n_sg:], grad=grad_w, hess=hess_w,
                             space="wpi",
                             trust_radius=qb_ext.trust_radius / scale)


# ---------------------------------------------------------------------------
# Dimension-reduced profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProfilePoint:
    angle: float
    boundary: Optional[BoundaryPoint]   # None marks a NoCrossing gap


@dataclass(frozen=True)
class ProfilePolyline:
    pair: tuple
    seed_pw: np.ndarray
    points: tuple[ProfilePoint, ...]
    gamma: np.ndarray = field(repr=False, default=None)

    @property
    def vertices(self) -> np.ndarray:
        """Full-dimension WPI coordinates of the found boundary points."""
        found = [pp.boundary.p_w for pp in self.points
                 if pp.boundary is not None]
        return np.asarray(found) if found else np.empty((0, self.seed_pw.size))

    @property
    def gaps(self) -> list[float]:
        return [pp.angle for pp in self.points if pp.boundary is None]


def profile_ray(case, gamma, anchor, seed_pw, pair, angle,
                tolerances=None, **kw) -> BoundaryPoint:
    """One boundary search in the (pair) plane at the given angle."""
    d = np.zeros(len(seed_pw))
    if len(pair) == 1:
        d[pair[0]] = np.cos(angle)   # angle 0 -> +axis, pi -> -axis
        if abs(d[pair[0]]) < 1e-12:
            raise ZeroDirection("degenerate 1-D profile angle")
    else:
        i, j = pair
        d[i] = np.cos(angle)
        d[j] = np.sin(angle)
    return ray_boundary_search(case, gamma, anchor, seed_pw, d,
                               tolerances=tolerances, **kw)


def profile_2d(case: NetworkCase, gamma, anchor: InjectionVector, pair,
               fixed=None, grid_n: int = 32, tolerances: Tolerances = None,
               **kw) -> ProfilePolyline:
    """Fan of boundary searches in a 2-D WPI plane, ordered by angle.

    ``pair`` holds the zero-based wind indices spanning the plane (a single
    index degenerates to the two +/- axis searches). All other WPIs stay at
    the anchor forecast unless overridden through ``fixed`` (index -> value).
    """
    tol = tolerances or Tolerances()
    gamma = as_policy(gamma)
    pair = tuple(int(i) for i in pair)
    if len(set(pair)) != len(pair):
        raise ValueError("profile indices must be distinct")
    for i in pair:
        if not 0 <= i < case.n_wind:
            raise ValueError(f"wind index {i} out of range")

    seed = anchor.p_w.astype(float).copy()
    for k, v in (fixed or {}).items():
        seed[int(k)] = float(v)

    if len(pair) == 1:
        angles = [0.0, np.pi]
    else:
        angles = list(np.linspace(0.0, 2.0 * np.pi, grid_n, endpoint=False))

    pts = []
    for ang in angles:
        try:
            bp = profile_ray(case, gamma, anchor, seed, pair, ang,
                             tolerances=tol, **kw)
        except NoCrossing:
            bp = None
        pts.append(ProfilePoint(angle=float(ang), boundary=bp))
    return ProfilePolyline(pair=pair, seed_pw=seed, points=tuple(pts),
                           gamma=gamma.gamma)

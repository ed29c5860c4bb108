"""Forecast-error modelling: beta marginals, copula sampling, ellipsoid fit.

Wind forecast errors are bounded random variables, so each farm carries a
scaled beta marginal on an error support [lower, upper] around the forecast.
Joint scenarios are drawn through a Gaussian copula parameterized by a rank
correlation matrix, and the ellipsoidal uncertainty set is fitted by picking
the smallest radius that still covers the requested fraction of scenarios.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.linalg import cho_factor, cho_solve

from .errors import (
    CopulaRepairWarning,
    InfeasibleMoments,
    NotPositiveDefinite,
)


@dataclass(frozen=True)
class BetaMarginal:
    """Scaled beta distribution of one farm's forecast error (pu).

    The density lives on [lower, upper]; shape_a/shape_b are the usual beta
    shape parameters of the normalized variable (x - lower)/(upper - lower).
    """

    shape_a: float
    shape_b: float
    lower: float
    upper: float

    def __post_init__(self):
        if self.shape_a <= 0 or self.shape_b <= 0:
            raise ValueError("beta shapes must be positive")
        if not self.lower < self.upper:
            raise ValueError("support bounds must satisfy lower < upper")

    @property
    def mean(self) -> float:
        span = self.upper - self.lower
        return self.lower + self.shape_a * span / (self.shape_a + self.shape_b)

    @property
    def variance(self) -> float:
        a, b = self.shape_a, self.shape_b
        span = self.upper - self.lower
        return a * b * span * span / ((a + b) ** 2 * (a + b + 1.0))

    @property
    def sigma(self) -> float:
        return math.sqrt(self.variance)

    def ppf(self, u):
        """Inverse CDF of the scaled beta (vectorized)."""
        z = stats.beta.ppf(u, self.shape_a, self.shape_b)
        return self.lower + (self.upper - self.lower) * z


def calibrate_marginal(sigma: float, lower: float, upper: float,
                       mean: float = 0.0) -> BetaMarginal:
    """Solve the beta shapes that hit a requested mean and std on [lower, upper].

    Inverts the moment relations of the scaled beta: with m the normalized
    mean and v the normalized variance, shape_a = m*(m*(1-m)/v - 1) and
    shape_b = (1-m)*(m*(1-m)/v - 1). Raises InfeasibleMoments when no
    positive shape pair exists (v >= m*(1-m), which includes the absolute
    bound sigma^2 >= (upper-lower)^2/4).
    """
    if sigma <= 0:
        raise InfeasibleMoments("sigma must be positive")
    if not lower < upper:
        raise InfeasibleMoments("support bounds must satisfy lower < upper")
    span = upper - lower
    m = (mean - lower) / span
    if not 0.0 < m < 1.0:
        raise InfeasibleMoments(
            f"mean {mean} outside the open support ({lower}, {upper})")
    v = (sigma / span) ** 2
    if v >= m * (1.0 - m):
        raise InfeasibleMoments(
            f"variance {sigma**2:.6g} not achievable on ({lower}, {upper}) "
            f"with mean {mean}")
    k = m * (1.0 - m) / v - 1.0
    return BetaMarginal(shape_a=m * k, shape_b=(1.0 - m) * k,
                        lower=lower, upper=upper)


def spearman_to_linear(rho):
    """Exact rank-to-linear correlation conversion for a Gaussian copula."""
    return 2.0 * np.sin(np.pi * np.asarray(rho, dtype=float) / 6.0)


@dataclass(frozen=True)
class ScenarioSet:
    """Matrix of wind-injection realizations, one scenario per row (pu)."""

    samples: np.ndarray          # (n_total, n_w)
    seed: int
    provenance: str = "gaussian-copula"

    def __post_init__(self):
        object.__setattr__(self, "samples",
                           np.atleast_2d(np.asarray(self.samples, dtype=float)))

    @property
    def n_total(self) -> int:
        return self.samples.shape[0]

    @property
    def n_farms(self) -> int:
        return self.samples.shape[1]


def sample_scenarios(forecast, marginals, rank_corr, n_total, seed) -> ScenarioSet:
    """Draw correlated wind scenarios around a forecast point.

    Gaussian-copula construction: correlated standard normals with the
    converted linear correlation 2*sin(pi*rho/6), pushed through the normal
    CDF and each farm's inverse beta CDF, then shifted by the forecast.
    Deterministic for a fixed seed and independent of any later partitioning
    of the rows across workers (the whole matrix is drawn in one pass).
    """
    forecast = np.asarray(forecast, dtype=float)
    n_w = forecast.size
    if len(marginals) != n_w:
        raise ValueError("one marginal per farm required")
    if n_total <= 0:
        raise ValueError("n_total must be positive")
    rho = np.asarray(rank_corr, dtype=float)
    if rho.shape != (n_w, n_w):
        raise ValueError("rank correlation shape mismatch")

    rho_lin = spearman_to_linear(rho)
    np.fill_diagonal(rho_lin, 1.0)
    rho_lin, repaired = _nearest_psd(rho_lin)
    provenance = "gaussian-copula"
    if repaired:
        warnings.warn(
            "converted copula correlation was not PSD; eigenvalues clipped",
            CopulaRepairWarning)
        provenance = "gaussian-copula/psd-repaired"

    # Cholesky with a tiny jitter ladder for the PSD-but-singular edge.
    chol = None
    for jitter in (0.0, 1e-12, 1e-10, 1e-8):
        try:
            chol = np.linalg.cholesky(rho_lin + jitter * np.eye(n_w))
            break
        except np.linalg.LinAlgError:
            continue
    if chol is None:
        raise NotPositiveDefinite("copula correlation could not be factorized")

    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n_total, n_w)) @ chol.T
    u = stats.norm.cdf(z)
    errors = np.column_stack([marginals[j].ppf(u[:, j]) for j in range(n_w)])
    return ScenarioSet(samples=forecast[None, :] + errors, seed=int(seed),
                       provenance=provenance)


def _nearest_psd(mat, floor=0.0):
    """Clip negative eigenvalues and restore the unit diagonal."""
    vals, vecs = np.linalg.eigh(mat)
    if vals.min() >= -1e-12:
        return mat, False
    vals = np.clip(vals, floor, None)
    fixed = (vecs * vals) @ vecs.T
    d = np.sqrt(np.clip(np.diag(fixed), 1e-12, None))
    fixed = fixed / np.outer(d, d)
    np.fill_diagonal(fixed, 1.0)
    return fixed, True


def build_shape_matrix(sigmas, rho) -> np.ndarray:
    """Covariance-form shape matrix Q_ij = rho_ij * sigma_i * sigma_j."""
    sigmas = np.asarray(sigmas, dtype=float)
    rho = np.asarray(rho, dtype=float)
    if np.any(sigmas <= 0):
        raise ValueError("sigmas must be positive")
    q = rho * np.outer(sigmas, sigmas)
    q = 0.5 * (q + q.T)
    if np.linalg.eigvalsh(q).min() <= 0.0:
        raise NotPositiveDefinite("shape matrix is not positive definite")
    return q


@dataclass(frozen=True)
class EllipsoidalUncertaintySet:
    """Set {p : (p - center)' Q^-1 (p - center) <= eta}."""

    center: np.ndarray
    q: np.ndarray
    eta: float

    def __post_init__(self):
        center = np.asarray(self.center, dtype=float)
        q = np.asarray(self.q, dtype=float)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "q", 0.5 * (q + q.T))
        if self.eta < 0:
            raise ValueError("eta must be nonnegative")
        if np.linalg.eigvalsh(self.q).min() <= 0.0:
            raise NotPositiveDefinite("shape matrix is not positive definite")

    def mahalanobis_sq(self, p_w):
        """Quadratic form value(s); membership is value <= eta."""
        return mahalanobis_sq_many(self.center, self.q, p_w)

    def contains(self, p_w):
        return self.mahalanobis_sq(p_w) <= self.eta


def mahalanobis_sq_many(center, q, points):
    """Solve-based squared Mahalanobis distances (no explicit inverse)."""
    center = np.asarray(center, dtype=float)
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    diff = np.atleast_2d(pts) - center[None, :]
    factor = cho_factor(np.asarray(q, dtype=float))
    sol = cho_solve(factor, diff.T)
    d2 = np.einsum("ij,ji->i", diff, sol)
    return float(d2[0]) if single else d2


def mahalanobis_sq(eus: EllipsoidalUncertaintySet, p_w):
    return eus.mahalanobis_sq(p_w)


def fit_eus(center, q, scenarios, alpha_conf) -> EllipsoidalUncertaintySet:
    """Fit the smallest-radius ellipsoid covering alpha_conf of the scenarios.

    For a fixed shape matrix the exact minimizer of the radius subject to
    empirical coverage >= alpha_conf is the ceil(alpha*N)-th smallest squared
    Mahalanobis distance, so the fit is a single order statistic.
    """
    if not 0.0 < alpha_conf <= 1.0:
        raise ValueError("alpha_conf must lie in (0, 1]")
    samples = scenarios.samples if isinstance(scenarios, ScenarioSet) else \
        np.atleast_2d(np.asarray(scenarios, dtype=float))
    n = samples.shape[0]
    if n == 0:
        raise ValueError("scenario set is empty")
    d2 = mahalanobis_sq_many(center, q, samples)
    k = math.ceil(alpha_conf * n)
    eta = float(np.partition(d2, k - 1)[k - 1])
    return EllipsoidalUncertaintySet(center=np.asarray(center, dtype=float),
                                     q=np.asarray(q, dtype=float), eta=eta)


def scenarios_to_csv(scen: ScenarioSet, farm_ids, extra_comments=()):
    """Render a scenario set as CSV text: farm-id header, one row per scenario.

    Comment lines start with '#' and are ignored by the importer, which lets
    emitted files carry manifest digests without breaking round-trips.
    """
    lines = [f"# {c}" for c in extra_comments]
    lines.append(",".join(str(f) for f in farm_ids))
    for row in scen.samples:
        lines.append(",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def scenarios_from_csv(text, seed=0) -> tuple[ScenarioSet, list[str]]:
    """Parse scenario CSV produced by scenarios_to_csv (or external history)."""
    rows = []
    header = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if header is None:
            header = [tok.strip() for tok in line.split(",")]
            continue
        rows.append([float(tok) for tok in line.split(",")])
    if header is None or not rows:
        raise ValueError("scenario CSV has no data rows")
    samples = np.asarray(rows, dtype=float)
    if samples.shape[1] != len(header):
        raise ValueError("scenario CSV row width does not match header")
    return ScenarioSet(samples=samples, seed=seed, provenance="csv-import"), header

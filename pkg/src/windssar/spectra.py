"""Eigen-analysis of the reduced state matrix and stability classification.

Multi-machine cases without an ideal (infinite) slack source carry an exact
rigid-rotation symmetry: shifting every rotor angle and every bus angle by
the same constant leaves the DAE invariant, so the reduced matrix has an
exact zero eigenvalue whose right eigenvector is the indicator of the delta
states. That mode says nothing about stability; it is deflated by a
Householder similarity on the known kernel vector before the maximum real
part is taken, which keeps the remaining spectrum well conditioned even when
a genuine real eigenvalue approaches zero near a saddle-node point. The full
(undeflated) spectrum is still reported for pencil cross-checks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .errors import DegenerateEigenvalue, NumericalFailure
from .dynamics import ReducedStateMatrix

_SYMMETRY_RESID_TOL = 1e-6


@dataclass(frozen=True)
class SpectralSummary:
    eigenvalues: np.ndarray        # full spectrum of A (1/s)
    max_real: float                # over the deflated spectrum
    critical_eigenvalue: complex
    critical_right: np.ndarray     # eigenvectors in deflated coordinates
    critical_left: np.ndarray      # normalized so w^H v = 1
    damping_ratios: np.ndarray     # one per oscillatory pair (Im > 0)
    deflated: bool
    householder: Optional[np.ndarray]   # unit reflector vector, or None
    deflated_eigenvalues: np.ndarray

    @property
    def critical_index(self) -> int:
        """Index into ``eigenvalues`` closest to the critical eigenvalue."""
        return int(np.argmin(np.abs(self.eigenvalues
                                    - self.critical_eigenvalue)))


@dataclass(frozen=True)
class StabilityVerdict:
    status: str                    # Stable|Unstable|Marginal|SingularAlgebraic|Inadmissible
    max_real: float
    distance_to_axis: float
    cause: Optional[str] = None

    @property
    def is_stable(self) -> bool:
        return self.status == "Stable"


def _householder_from(v_unit):
    """Unit reflector u with (I - 2uu')v_unit = -sign(v0)*e1."""
    e1 = np.zeros_like(v_unit)
    sign = 1.0 if v_unit[0] >= 0 else -1.0
    e1[0] = sign
    u = v_unit + e1
    nrm = np.linalg.norm(u)
    if nrm == 0.0:
        return None
    return u / nrm


def _apply_householder(u, mat):
    """(I - 2uu') M (I - 2uu') without forming the reflector."""
    m = mat - 2.0 * np.outer(u, u @ mat)
    return m - 2.0 * np.outer(m @ u, u)


def eigen_analysis(red: ReducedStateMatrix) -> SpectralSummary:
    """Full spectrum, deflation of the symmetry mode, and the critical pair."""
    a = np.asarray(red.a, dtype=float)
    n = a.shape[0]
    if not np.all(np.isfinite(a)):
        raise NumericalFailure("reduced matrix contains non-finite entries")

    try:
        full_eigs = scipy.linalg.eigvals(a)
    except Exception as exc:  # pragma: no cover - LAPACK nonconvergence
        raise NumericalFailure(f"eigenvalue routine failed: {exc}")

    u = None
    deflated = False
    if red.rotation_symmetric and red.delta_indices:
        v0 = np.zeros(n)
        v0[list(red.delta_indices)] = 1.0
        v0 /= np.linalg.norm(v0)
        resid = np.linalg.norm(a @ v0, np.inf)
        scale = 1.0 + np.linalg.norm(a, np.inf)
        if resid > _SYMMETRY_RESID_TOL * scale:
            raise NumericalFailure(
                f"expected rotation-symmetry kernel violated "
                f"(|A v0| = {resid:.3e})")
        u = _householder_from(v0)
        deflated = u is not None

    if deflated:
        work = _apply_householder(u, a)[1:, 1:]
    else:
        work = a

    try:
        eigs, vl, vr = scipy.linalg.eig(work, left=True, right=True)
    except Exception as exc:  # pragma: no cover
        raise NumericalFailure(f"eigenvalue routine failed: {exc}")

    # Deterministic critical pick: largest real part, ties broken toward the
    # nonnegative imaginary member of a conjugate pair.
    order = np.lexsort((-eigs.imag, -eigs.real))
    crit = order[0]
    lam = complex(eigs[crit])
    v = vr[:, crit]
    w = vl[:, crit]
    c = np.vdot(w, v)       # w^H v
    if abs(c) < 1e-12:
        raise NumericalFailure("critical left/right eigenvectors orthogonal")
    w = w / np.conj(c)

    imag_pos = full_eigs[full_eigs.imag > 1e-12]
    damp = -imag_pos.real / np.abs(imag_pos) if imag_pos.size else \
        np.empty(0)

    return SpectralSummary(
        eigenvalues=full_eigs, max_real=float(eigs.real.max()),
        critical_eigenvalue=lam, critical_right=v, critical_left=w,
        damping_ratios=damp, deflated=deflated, householder=u,
        deflated_eigenvalues=eigs)


def stability_verdict(summary: SpectralSummary,
                      margin_tol: float = 1e-6) -> StabilityVerdict:
    """Classify per max{Re(lambda)} with a symmetric marginal band."""
    mr = summary.max_real
    if abs(mr) <= margin_tol:
        status = "Marginal"
    elif mr < 0.0:
        status = "Stable"
    else:
        status = "Unstable"
    return StabilityVerdict(status=status, max_real=mr,
                            distance_to_axis=abs(mr))


def singular_verdict(rcond: float) -> StabilityVerdict:
    return StabilityVerdict(status="SingularAlgebraic", max_real=np.nan,
                            distance_to_axis=np.nan,
                            cause=f"rcond {rcond:.3e}")


def inadmissible_verdict(cause: str) -> StabilityVerdict:
    return StabilityVerdict(status="Inadmissible", max_real=np.nan,
                            distance_to_axis=np.nan, cause=cause)


def check_simple_critical(summary: SpectralSummary,
                          eig_sep_tol: float = 1e-4) -> None:
    """Raise DegenerateEigenvalue unless the critical mode leads cleanly.

    Conjugate pairs count as one mode: the partner of an oscillatory critical
    eigenvalue is excluded before measuring the real-part gap to the runner-up.
    """
    eigs = summary.deflated_eigenvalues
    lam = summary.critical_eigenvalue
    mask = np.ones(eigs.size, dtype=bool)
    ordered = np.lexsort((-eigs.imag, -eigs.real))
    mask[ordered[0]] = False
    if abs(lam.imag) > 1e-12:
        partner = np.argmin(np.abs(eigs - np.conj(lam)))
        mask[partner] = False
    rest = eigs[mask]
    if rest.size == 0:
        return
    gap = lam.real - rest.real.max()
    if gap <= eig_sep_tol:
        raise DegenerateEigenvalue(
            f"critical eigenvalue not separated (gap {gap:.3e})")


def critical_sensitivity_from_matrices(summary: SpectralSummary,
                                       da: np.ndarray) -> float:
    """First-order move of Re(lambda_crit) for a perturbation dA of A.

    Uses Re(w^H dA v) with the biorthogonal pair already normalized to
    w^H v = 1; dA is deflated with the same reflector as the analysis.
    """
    da = np.asarray(da, dtype=float)
    if summary.deflated:
        da = _apply_householder(summary.householder, da)[1:, 1:]
    v = summary.critical_right
    w = summary.critical_left
    return float(np.real(np.vdot(w, da @ v)))


def critical_real_sensitivity(case, gamma, anchor, p_w, direction,
                              tolerances=None, step: float = 1e-5) -> float:
    """Directional derivative of max Re(lambda) along d in WPI space.

    The perturbed reduced matrices come from re-running the whole pipeline
    (AGC lift, power flow, equilibrium, reduction) at p_w +/- step*d, so the
    equilibrium drift with the injections is inside the derivative. Requires
    a simple critical eigenvalue.
    """
    from .pipeline import lift_wpi, reduced_at  # local import, no cycle

    from .netcase import Tolerances
    tol = tolerances or Tolerances()
    direction = np.asarray(direction, dtype=float)
    p_w = np.asarray(p_w, dtype=float)

    red0 = reduced_at(case, lift_wpi(case, gamma, anchor, p_w), tol)
    summary = eigen_analysis(red0)
    check_simple_critical(summary, tol.eig_sep_tol)
    if not np.any(direction):
        return 0.0

    red_p = reduced_at(case, lift_wpi(case, gamma, anchor,
                                      p_w + step * direction), tol)
    red_m = reduced_at(case, lift_wpi(case, gamma, anchor,
                                      p_w - step * direction), tol)
    da = (red_p.a - red_m.a) / (2.0 * step)
    return critical_sensitivity_from_matrices(summary, da)

"""Thin composition helpers: injection -> power flow -> equilibrium -> A.

These are the hot-path building blocks shared by the region tracer, the
sensitivity code and the Monte Carlo classifier.
"""

from __future__ import annotations

import numpy as np

from .dynamics import assemble_jacobians, init_equilibrium, reduce_state_matrix
from .netcase import AgcPolicy, NetworkCase, Tolerances
from .powerflow import InjectionVector, apply_agc, solve_power_flow
from .spectra import SpectralSummary, eigen_analysis


def as_policy(gamma) -> AgcPolicy:
    if isinstance(gamma, AgcPolicy):
        return gamma
    return AgcPolicy(gamma=np.asarray(gamma, dtype=float))


def lift_wpi(case: NetworkCase, gamma, anchor: InjectionVector, p_w,
             check_limits=True) -> InjectionVector:
    """Injection at WPI point p_w with SGs compensating via the AGC factors."""
    delta_w = np.asarray(p_w, dtype=float) - anchor.p_w
    return apply_agc(anchor, delta_w, as_policy(gamma), case,
                     check_limits=check_limits)


def reduced_at(case: NetworkCase, inj: InjectionVector,
               tol: Tolerances = None):
    """Reduced state matrix of the equilibrium at the given injection."""
    tol = tol or Tolerances()
    pf = solve_power_flow(case, inj, pf_tol=tol.pf_tol,
                          max_iter=tol.pf_max_iter)
    eq = init_equilibrium(case, pf)
    jac = assemble_jacobians(case, eq)
    return reduce_state_matrix(jac, case=case, sib_tol=tol.sib_tol)


def spectral_at(case: NetworkCase, inj: InjectionVector,
                tol: Tolerances = None) -> SpectralSummary:
    return eigen_analysis(reduced_at(case, inj, tol))


def max_real_at(case: NetworkCase, inj: InjectionVector,
                tol: Tolerances = None) -> float:
    return spectral_at(case, inj, tol).max_real

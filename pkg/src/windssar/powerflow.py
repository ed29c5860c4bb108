"""AC power flow and AGC redistribution of wind deviations.

Newton-Raphson in polar coordinates with a flat start. Buses carrying a
synchronous generator are PV (the slack bus among them fixes angle and
voltage), everything else is PQ. Loads are constant power; wind farms are
constant-P injections at a fixed power factor. Network losses plus any
schedule imbalance land on the slack bus.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LimitViolation, NonConvergence
from .netcase import NetworkCase, _wind_q


@dataclass(frozen=True)
class InjectionVector:
    """Scheduled SG and wind active injections (pu), in declaration order."""

    p_s: np.ndarray
    p_w: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p_s", np.asarray(self.p_s, dtype=float))
        object.__setattr__(self, "p_w", np.asarray(self.p_w, dtype=float))

    @property
    def p_e(self) -> np.ndarray:
        """Extended injection vector [p_s; p_w]."""
        return np.concatenate([self.p_s, self.p_w])

    @staticmethod
    def from_extended(p_e, n_sg):
        p_e = np.asarray(p_e, dtype=float)
        return InjectionVector(p_s=p_e[:n_sg], p_w=p_e[n_sg:])


def base_injection(case: NetworkCase) -> InjectionVector:
    """Scheduled operating point straight from the case file."""
    return InjectionVector(
        p_s=np.array([sg.p_set for sg in case.sg_units], dtype=float),
        p_w=np.array([wf.forecast for wf in case.wind_farms], dtype=float))


def apply_agc(base: InjectionVector, delta_w, policy, case: NetworkCase,
              check_limits=True) -> InjectionVector:
    """Shift wind by delta_w and compensate SGs by their contribution factors.

    p_w <- p_w + delta_w and p_si <- p_si - gamma_i * sum(delta_w), which
    keeps sum(p_s) + sum(p_w) exactly balanced. Box limits of every unit are
    checked unless check_limits is False.
    """
    delta_w = np.asarray(delta_w, dtype=float)
    if delta_w.shape != base.p_w.shape:
        raise ValueError("delta_w length must match the number of wind farms")
    total = float(np.sum(delta_w))
    new = InjectionVector(p_s=base.p_s - policy.gamma * total,
                          p_w=base.p_w + delta_w)
    if check_limits:
        for i, sg in enumerate(case.sg_units):
            if new.p_s[i] < sg.p_min - 1e-12:
                raise LimitViolation("sg", i, "lower", new.p_s[i], sg.p_min)
            if new.p_s[i] > sg.p_max + 1e-12:
                raise LimitViolation("sg", i, "upper", new.p_s[i], sg.p_max)
        for j, wf in enumerate(case.wind_farms):
            if new.p_w[j] < -1e-12:
                raise LimitViolation("wind", j, "lower", new.p_w[j], 0.0)
            if new.p_w[j] > wf.capacity + 1e-12:
                raise LimitViolation("wind", j, "upper", new.p_w[j],
                                     wf.capacity)
    return new


@dataclass(frozen=True)
class PowerFlowSolution:
    v_mag: np.ndarray            # pu, case bus order
    v_ang: np.ndarray            # rad
    p_net: np.ndarray            # pu net injection per bus
    q_net: np.ndarray
    slack_p: float               # pu absorbed by the slack bus
    iterations: int
    mismatch: float
    injection: InjectionVector = None


def build_ybus(case: NetworkCase) -> np.ndarray:
    """Dense complex bus admittance matrix (line charging split, from-side tap)."""
    nb = case.n_buses
    y = np.zeros((nb, nb), dtype=complex)
    for br in case.branches:
        f = case.bus_index(br.from_bus)
        t = case.bus_index(br.to_bus)
        ys = 1.0 / complex(br.r, br.x)
        bc = 0.5j * br.b
        tap = br.tap if br.tap else 1.0
        y[f, f] += (ys + bc) / (tap * tap)
        y[t, t] += ys + bc
        y[f, t] -= ys / tap
        y[t, f] -= ys / tap
    return y


def fixed_bus_injections(case: NetworkCase, inj: InjectionVector):
    """Non-machine P and Q injections per bus: wind minus load (pu)."""
    nb = case.n_buses
    p = np.zeros(nb)
    q = np.zeros(nb)
    for ld in case.loads:
        k = case.bus_index(ld.bus)
        p[k] -= ld.p
        q[k] -= ld.q
    for j, wf in enumerate(case.wind_farms):
        k = case.bus_index(wf.bus)
        p[k] += inj.p_w[j]
        q[k] += _wind_q(inj.p_w[j], wf.power_factor)
    return p, q


def network_injections(ybus, v_mag, v_ang):
    """Complex power injected into the network at every bus."""
    v = v_mag * np.exp(1j * v_ang)
    return v * np.conj(ybus @ v)


def injection_jacobian(ybus, v_mag, v_ang):
    """dS/d(theta) and dS/d(Vm) of the network injection (dense blocks)."""
    v = v_mag * np.exp(1j * v_ang)
    ibus = ybus @ v
    diag_v = np.diag(v)
    ds_dva = 1j * diag_v @ np.conj(np.diag(ibus) - ybus @ diag_v)
    e = v / v_mag
    ds_dvm = diag_v @ np.conj(ybus @ np.diag(e)) + np.conj(np.diag(ibus)) @ np.diag(e)
    return ds_dva, ds_dvm


def solve_power_flow(case: NetworkCase, inj: InjectionVector,
                     pf_tol=1e-8, max_iter=30) -> PowerFlowSolution:
    """Newton-Raphson power flow for the given injection vector.

    SG buses hold their voltage setpoint and scheduled P (the slack bus holds
    V and angle instead and absorbs losses plus residual imbalance).
    Raises NonConvergence past the iteration cap.
    """
    nb = case.n_buses
    ybus = build_ybus(case)
    slack = case.bus_index(case.slack_bus)

    p_fix, q_fix = fixed_bus_injections(case, inj)
    p_sched = p_fix.copy()
    v_set = np.ones(nb)
    pv = []
    for i, sg in enumerate(case.sg_units):
        k = case.bus_index(sg.bus)
        p_sched[k] += inj.p_s[i]
        v_set[k] = sg.v_set
        if k != slack:
            pv.append(k)
    if case.has_infinite_bus():
        # Ideal-source slack keeps V = 1 unless some SG lives there.
        v_set[slack] = case_slack_vset(case)
    pv = sorted(set(pv))
    pq = sorted(set(range(nb)) - set(pv) - {slack})

    v_mag = np.ones(nb)
    v_mag[pv] = v_set[pv]
    v_mag[slack] = v_set[slack]
    v_ang = np.zeros(nb)

    non_slack = pv + pq
    non_slack.sort()
    mismatch = np.inf
    for it in range(1, max_iter + 1):
        s_net = network_injections(ybus, v_mag, v_ang)
        dp = p_sched[non_slack] - s_net.real[non_slack]
        dq = q_fix[pq] - s_net.imag[pq]
        f = np.concatenate([dp, dq])
        mismatch = float(np.max(np.abs(f))) if f.size else 0.0
        if mismatch <= pf_tol:
            return PowerFlowSolution(
                v_mag=v_mag, v_ang=v_ang, p_net=s_net.real, q_net=s_net.imag,
                slack_p=float(s_net.real[slack] - p_fix[slack]),
                iterations=it - 1, mismatch=mismatch, injection=inj)

        ds_dva, ds_dvm = injection_jacobian(ybus, v_mag, v_ang)
        j11 = ds_dva.real[np.ix_(non_slack, non_slack)]
        j12 = ds_dvm.real[np.ix_(non_slack, pq)]
        j21 = ds_dva.imag[np.ix_(pq, non_slack)]
        j22 = ds_dvm.imag[np.ix_(pq, pq)]
        jac = np.block([[j11, j12], [j21, j22]])
        try:
            dx = np.linalg.solve(jac, f)
        except np.linalg.LinAlgError:
            raise NonConvergence(mismatch, it)
        n1 = len(non_slack)
        v_ang[non_slack] += dx[:n1]
        v_mag[pq] += dx[n1:]
        if np.any(v_mag <= 0) or not np.all(np.isfinite(v_mag)):
            raise NonConvergence(mismatch, it)

    raise NonConvergence(mismatch, max_iter)


def case_slack_vset(case: NetworkCase) -> float:
    for sg in case.sg_units:
        if sg.bus == case.slack_bus:
            return sg.v_set
    return 1.0

"""Machine-network DAE: equilibrium back-solve, linearization, reduction.

States per machine are [delta, omega] for the classic model and
[delta, omega, eq_p, e_fq, v_r, v_m] for the third-order model with its
simplified third-order excitation chain. Algebraic variables are all bus
angles and magnitudes followed by the stator currents (i_d, i_q) of every
machine; the network enters through full complex power balance at every bus.
Stator transients and resistance are neglected, wind farms contribute only
constant-P/constant-power-factor terms to the algebraic equations.

Sign conventions: machine dq frame with the q axis leading, so
v_d = V sin(delta - theta) and v_q = V cos(delta - theta); electrical power
p_e = v_d i_d + v_q i_q and reactive output q_e = v_q i_d - v_d i_q.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import get_lapack_funcs, lu_factor, lu_solve

from .errors import InfeasibleSteadyState, SingularAlgebraicBlock
from .netcase import NetworkCase
from .powerflow import (
    PowerFlowSolution,
    build_ybus,
    case_slack_vset,
    fixed_bus_injections,
    injection_jacobian,
    network_injections,
)

_THIRD_STATES = ("delta", "omega", "eq_p", "e_fq", "v_r", "v_m")
_CLASSIC_STATES = ("delta", "omega")


@dataclass(frozen=True)
class MachineInit:
    """Per-machine DAE constants fixed by the equilibrium."""

    p_m: float
    v_ref: Optional[float] = None     # third-order exciter reference
    e_q_const: Optional[float] = None  # classic constant EMF


@dataclass(frozen=True)
class Equilibrium:
    x0: np.ndarray
    y0: np.ndarray
    machines: tuple[MachineInit, ...]
    pf: PowerFlowSolution
    residual_norm: float

    @property
    def injection(self):
        return self.pf.injection


@dataclass(frozen=True)
class DaeJacobians:
    a_tilde: np.ndarray   # dF/dx, n x n
    b_tilde: np.ndarray   # dF/dy, n x m
    c_tilde: np.ndarray   # dG/dx, m x n
    d_tilde: np.ndarray   # dG/dy, m x m


@dataclass(frozen=True)
class ReducedStateMatrix:
    a: np.ndarray
    d_tilde_condition: float
    state_labels: tuple[str, ...]
    delta_indices: tuple[int, ...]
    rotation_symmetric: bool


class DaeModel:
    """Index bookkeeping plus residual and Jacobian evaluation for one case."""

    def __init__(self, case: NetworkCase):
        self.case = case
        nb = case.n_buses
        self.nb = nb
        offs = []
        labels = []
        deltas = []
        off = 0
        for i, sg in enumerate(case.sg_units):
            offs.append(off)
            names = _THIRD_STATES if sg.model == "third_order_exciter" \
                else _CLASSIC_STATES
            deltas.append(off)
            labels.extend(f"sg{i}:{nm}" for nm in names)
            off += len(names)
        self.state_offsets = offs
        self.n_states = off
        self.state_labels = tuple(labels)
        self.delta_indices = tuple(deltas)
        self.n_alg = 2 * nb + 2 * case.n_sg
        self.ybus = build_ybus(case)
        self.slack = case.bus_index(case.slack_bus)
        self.infinite_bus = case.has_infinite_bus()
        self.machine_bus = [case.bus_index(sg.bus) for sg in case.sg_units]

    # y layout helpers
    def idx_theta(self, k):
        return k

    def idx_v(self, k):
        return self.nb + k

    def idx_id(self, i):
        return 2 * self.nb + 2 * i

    def idx_iq(self, i):
        return 2 * self.nb + 2 * i + 1

    def pack_y(self, v_ang, v_mag, i_d, i_q):
        y = np.empty(self.n_alg)
        y[:self.nb] = v_ang
        y[self.nb:2 * self.nb] = v_mag
        y[2 * self.nb::2] = i_d
        y[2 * self.nb + 1::2] = i_q
        return y

    def residual(self, x, y, machines, p_fix, q_fix):
        """Full DAE residual (f, g) at an arbitrary point."""
        case = self.case
        nb = self.nb
        v_ang = y[:nb]
        v_mag = y[nb:2 * nb]
        f = np.zeros(self.n_states)
        g = np.zeros(self.n_alg)

        s_net = network_injections(self.ybus, v_mag, v_ang)
        g[:nb] = p_fix - s_net.real
        g[nb:2 * nb] = q_fix - s_net.imag

        omega_s = case.omega_s
        for i, sg in enumerate(case.sg_units):
            o = self.state_offsets[i]
            k = self.machine_bus[i]
            delta = x[o]
            omega = x[o + 1]
            i_d = y[self.idx_id(i)]
            i_q = y[self.idx_iq(i)]
            vk = v_mag[k]
            ang = delta - v_ang[k]
            v_d = vk * np.sin(ang)
            v_q = vk * np.cos(ang)
            p_e = v_d * i_d + v_q * i_q
            q_e = v_q * i_d - v_d * i_q
            mc = machines[i]

            f[o] = omega_s * (omega - 1.0)
            f[o + 1] = (-sg.d * (omega - 1.0) + mc.p_m - p_e) / sg.t_j
            if sg.model == "third_order_exciter":
                eq_p = x[o + 2]
                e_fq = x[o + 3]
                v_r = x[o + 4]
                v_m = x[o + 5]
                f[o + 2] = (-eq_p - (sg.x_d - sg.x_d_prime) * i_d + e_fq) \
                    / sg.t_d0_prime
                f[o + 3] = (-e_fq + (sg.t_a - sg.t_c) * v_r / sg.t_a
                            - sg.k_a * sg.t_c * v_m / sg.t_a
                            + sg.k_a * sg.t_c * mc.v_ref / sg.t_a) / sg.t_b
                f[o + 4] = (sg.k_a * (mc.v_ref - v_m) - v_r) / sg.t_a
                f[o + 5] = (vk - v_m) / sg.t_r
            else:
                eq_p = mc.e_q_const

            g[k] += p_e
            g[nb + k] += q_e
            g[self.idx_id(i)] = v_d - sg.xq_eff * i_q
            g[self.idx_iq(i)] = v_q - eq_p + sg.x_d_prime * i_d

        if self.infinite_bus:
            g[self.slack] = v_ang[self.slack]
            g[nb + self.slack] = v_mag[self.slack] - case_slack_vset(case)
        return f, g

    def jacobians(self, x, y, machines) -> DaeJacobians:
        """Analytic dF/dx, dF/dy, dG/dx, dG/dy at (x, y)."""
        case = self.case
        nb = self.nb
        n, m = self.n_states, self.n_alg
        v_ang = y[:nb]
        v_mag = y[nb:2 * nb]
        at = np.zeros((n, n))
        bt = np.zeros((n, m))
        ct = np.zeros((m, n))
        dt = np.zeros((m, m))

        ds_dva, ds_dvm = injection_jacobian(self.ybus, v_mag, v_ang)
        dt[:nb, :nb] = -ds_dva.real
        dt[:nb, nb:2 * nb] = -ds_dvm.real
        dt[nb:2 * nb, :nb] = -ds_dva.imag
        dt[nb:2 * nb, nb:2 * nb] = -ds_dvm.imag

        omega_s = case.omega_s
        for i, sg in enumerate(case.sg_units):
            o = self.state_offsets[i]
            k = self.machine_bus[i]
            ith, iv = self.idx_theta(k), self.idx_v(k)
            iid, iiq = self.idx_id(i), self.idx_iq(i)
            delta = x[o]
            i_d = y[iid]
            i_q = y[iiq]
            vk = v_mag[k]
            ang = delta - v_ang[k]
            v_d = vk * np.sin(ang)
            v_q = vk * np.cos(ang)
            p_e = v_d * i_d + v_q * i_q
            q_e = v_q * i_d - v_d * i_q
            dpe_ddelta = q_e           # d(p_e)/d(delta) at fixed y
            dqe_ddelta = -p_e

            at[o, o + 1] = omega_s
            at[o + 1, o] = -dpe_ddelta / sg.t_j
            at[o + 1, o + 1] = -sg.d / sg.t_j
            bt[o + 1, ith] = dpe_ddelta / sg.t_j
            bt[o + 1, iv] = -(p_e / vk) / sg.t_j
            bt[o + 1, iid] = -v_d / sg.t_j
            bt[o + 1, iiq] = -v_q / sg.t_j

            if sg.model == "third_order_exciter":
                at[o + 2, o + 2] = -1.0 / sg.t_d0_prime
                at[o + 2, o + 3] = 1.0 / sg.t_d0_prime
                bt[o + 2, iid] = -(sg.x_d - sg.x_d_prime) / sg.t_d0_prime
                at[o + 3, o + 3] = -1.0 / sg.t_b
                at[o + 3, o + 4] = (sg.t_a - sg.t_c) / (sg.t_a * sg.t_b)
                at[o + 3, o + 5] = -sg.k_a * sg.t_c / (sg.t_a * sg.t_b)
                at[o + 4, o + 4] = -1.0 / sg.t_a
                at[o + 4, o + 5] = -sg.k_a / sg.t_a
                at[o + 5, o + 5] = -1.0 / sg.t_r
                bt[o + 5, iv] = 1.0 / sg.t_r

            # bus power balance rows
            ct[k, o] = dpe_ddelta
            ct[nb + k, o] = dqe_ddelta
            dt[k, ith] += -dpe_ddelta
            dt[k, iv] += p_e / vk
            dt[k, iid] += v_d
            dt[k, iiq] += v_q
            dt[nb + k, ith] += -dqe_ddelta
            dt[nb + k, iv] += q_e / vk
            dt[nb + k, iid] += v_q
            dt[nb + k, iiq] += -v_d

            # stator rows
            ct[iid, o] = v_q
            dt[iid, ith] = -v_q
            dt[iid, iv] = v_d / vk
            dt[iid, iiq] = -sg.xq_eff
            ct[iiq, o] = -v_d
            if sg.model == "third_order_exciter":
                ct[iiq, o + 2] = -1.0
            dt[iiq, ith] = v_d
            dt[iiq, iv] = v_q / vk
            dt[iiq, iid] = sg.x_d_prime

        if self.infinite_bus:
            s = self.slack
            ct[s, :] = 0.0
            ct[nb + s, :] = 0.0
            dt[s, :] = 0.0
            dt[nb + s, :] = 0.0
            dt[s, self.idx_theta(s)] = 1.0
            dt[nb + s, self.idx_v(s)] = 1.0
        return DaeJacobians(a_tilde=at, b_tilde=bt, c_tilde=ct, d_tilde=dt)


def init_equilibrium(case: NetworkCase, pf: PowerFlowSolution) -> Equilibrium:
    """Back-solve device steady states from a converged power flow.

    Every machine's terminal P, Q are recovered from the solved bus
    injections; the exciter reference is chosen so the excitation chain is at
    rest and mechanical power equals electrical power (damping acts on the
    speed deviation, which is zero at equilibrium).
    """
    model = DaeModel(case)
    p_fix, q_fix = fixed_bus_injections(case, pf.injection)
    x0 = np.zeros(model.n_states)
    i_d = np.zeros(case.n_sg)
    i_q = np.zeros(case.n_sg)
    machines = []

    for i, sg in enumerate(case.sg_units):
        k = model.machine_bus[i]
        p_mach = pf.p_net[k] - p_fix[k]
        q_mach = pf.q_net[k] - q_fix[k]
        v_ph = pf.v_mag[k] * np.exp(1j * pf.v_ang[k])
        i_ph = (p_mach - 1j * q_mach) / np.conj(v_ph)
        o = model.state_offsets[i]

        if sg.model == "third_order_exciter":
            e_guide = v_ph + 1j * sg.xq_eff * i_ph
            delta = float(np.angle(e_guide))
            rot = np.exp(-1j * (delta - np.pi / 2.0))
            idq = i_ph * rot
            vdq = v_ph * rot
            vd, vq = float(vdq.real), float(vdq.imag)
            id_, iq_ = float(idq.real), float(idq.imag)
            eq_p = vq + sg.x_d_prime * id_
            e_fq = eq_p + (sg.x_d - sg.x_d_prime) * id_
            if e_fq <= 0.0:
                raise InfeasibleSteadyState(
                    f"sg {i} (bus {sg.bus}): nonpositive field voltage "
                    f"{e_fq:.4g}")
            v_m = pf.v_mag[k]
            v_r = e_fq
            v_ref = v_m + v_r / sg.k_a
            x0[o:o + 6] = (delta, 1.0, eq_p, e_fq, v_r, v_m)
            machines.append(MachineInit(p_m=float(vd * id_ + vq * iq_),
                                        v_ref=float(v_ref)))
        else:
            e_ph = v_ph + 1j * sg.x_d_prime * i_ph
            delta = float(np.angle(e_ph))
            rot = np.exp(-1j * (delta - np.pi / 2.0))
            idq = i_ph * rot
            vdq = v_ph * rot
            vd, vq = float(vdq.real), float(vdq.imag)
            id_, iq_ = float(idq.real), float(idq.imag)
            x0[o:o + 2] = (delta, 1.0)
            machines.append(MachineInit(p_m=float(vd * id_ + vq * iq_),
                                        e_q_const=float(np.abs(e_ph))))
        i_d[i] = id_
        i_q[i] = iq_

    y0 = model.pack_y(pf.v_ang, pf.v_mag, i_d, i_q)
    machines = tuple(machines)
    f, g = model.residual(x0, y0, machines, p_fix, q_fix)
    resid = float(max(np.max(np.abs(f), initial=0.0),
                      np.max(np.abs(g), initial=0.0)))
    return Equilibrium(x0=x0, y0=y0, machines=machines, pf=pf,
                       residual_norm=resid)


def assemble_jacobians(case: NetworkCase, eq: Equilibrium) -> DaeJacobians:
    model = DaeModel(case)
    return model.jacobians(eq.x0, eq.y0, eq.machines)


def finite_difference_jacobians(case: NetworkCase, eq: Equilibrium,
                                step=1e-6) -> DaeJacobians:
    """Central finite differences of the residual; test oracle for assembly."""
    model = DaeModel(case)
    p_fix, q_fix = fixed_bus_injections(case, eq.injection)
    n, m = model.n_states, model.n_alg
    at = np.zeros((n, n))
    bt = np.zeros((n, m))
    ct = np.zeros((m, n))
    dt = np.zeros((m, m))

    for j in range(n):
        xp = eq.x0.copy()
        xm = eq.x0.copy()
        xp[j] += step
        xm[j] -= step
        fp, gp = model.residual(xp, eq.y0, eq.machines, p_fix, q_fix)
        fm, gm = model.residual(xm, eq.y0, eq.machines, p_fix, q_fix)
        at[:, j] = (fp - fm) / (2.0 * step)
        ct[:, j] = (gp - gm) / (2.0 * step)
    for j in range(m):
        yp = eq.y0.copy()
        ym = eq.y0.copy()
        yp[j] += step
        ym[j] -= step
        fp, gp = model.residual(eq.x0, yp, eq.machines, p_fix, q_fix)
        fm, gm = model.residual(eq.x0, ym, eq.machines, p_fix, q_fix)
        bt[:, j] = (fp - fm) / (2.0 * step)
        dt[:, j] = (gp - gm) / (2.0 * step)
    return DaeJacobians(a_tilde=at, b_tilde=bt, c_tilde=ct, d_tilde=dt)


def reduce_state_matrix(jac: DaeJacobians, case: NetworkCase = None,
                        sib_tol=1e-12,
                        state_labels=None, delta_indices=None,
                        rotation_symmetric=None) -> ReducedStateMatrix:
    """Schur complement A = A~ - B~ D~^-1 C~ via an LU solve.

    The reciprocal condition of D~ (1-norm estimate) is recorded; values
    below sib_tol raise SingularAlgebraicBlock, signalling proximity to a
    singularity-induced bifurcation.
    """
    d = jac.d_tilde
    anorm = np.linalg.norm(d, 1)
    lu, piv = lu_factor(d)
    gecon, = get_lapack_funcs(("gecon",), (d,))
    rcond, info = gecon(lu, anorm, norm="1")
    if info != 0 or not np.isfinite(rcond):
        raise SingularAlgebraicBlock(0.0)
    if rcond < sib_tol:
        raise SingularAlgebraicBlock(float(rcond))
    z = lu_solve((lu, piv), jac.c_tilde)
    a = jac.a_tilde - jac.b_tilde @ z

    if case is not None:
        model = DaeModel(case)
        state_labels = model.state_labels
        delta_indices = model.delta_indices
        rotation_symmetric = not model.infinite_bus
    if state_labels is None:
        state_labels = tuple(f"x{i}" for i in range(a.shape[0]))
    if delta_indices is None:
        delta_indices = ()
    return ReducedStateMatrix(a=a, d_tilde_condition=float(rcond),
                              state_labels=tuple(state_labels),
                              delta_indices=tuple(delta_indices),
                              rotation_symmetric=bool(rotation_symmetric))


def equilibrium_residual(case: NetworkCase, eq: Equilibrium):
    """Recompute the (f, g) residual of an equilibrium (test support)."""
    model = DaeModel(case)
    p_fix, q_fix = fixed_bus_injections(case, eq.injection)
    return model.residual(eq.x0, eq.y0, eq.machines, p_fix, q_fix)

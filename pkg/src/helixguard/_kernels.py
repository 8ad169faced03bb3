"""Hot numeric kernels.

Everything in this module operates on plain float64 ndarrays so that the
functions can be compiled with numba (see :mod:`helixguard._backend`).  The
pure-numpy fallback executes the same code paths uncompiled.

Conventions
-----------
state vector ``x`` (18,)  : [p(0:3), eta(3:6), v(6:9), omega(9:12), xi(12:18)]
input vector ``u`` (6,)   : rotor-speed rates [Hz/s]
mismatch ``zeta`` (9,)    : [dm, dJx, dJy, dJz, dT, dD, wbx, wby, wbz]
parameter pack ``par`` (7,): [m0, Jx, Jy, Jz, cf, g, D0]
``Z`` (3,6)               : unit thrust axis of each rotor in the body frame
``TQ`` (3,6)              : body torque per unit thrust (arm cross product
                            plus spin-signed drag-torque ratio ct/cf)

The gust force enters the translational channels scaled by 1/m0 in the
prediction model (constant selection matrix) and by the true mass in the
perturbed plant; the flag ``gust_true_mass`` switches between the two.
"""

from __future__ import annotations

import math

import numpy as np

from ._backend import njit

NX = 18
NU = 6
NZ = 9

GIMBAL_PITCH_LIMIT = math.pi / 2.0 - 0.01


@njit
def gtmr_rhs(x, u, zeta, gust, par, Z, TQ, gust_true_mass):
    """Continuous-time state derivative of the tilted hexarotor."""
    if abs(x[4]) >= GIMBAL_PITCH_LIMIT:
        raise ValueError("pitch angle too close to gimbal lock")

    m0 = par[0]
    cf = par[4]
    grav = par[5]
    d0 = par[6]

    dm = zeta[0]
    dT = zeta[4]
    dD = zeta[5]

    m = (1.0 + dm) * m0

    # body wrench from rotor thrusts T_i = (1+dT) * cf * xi_i^2
    fbx = 0.0
    fby = 0.0
    fbz = 0.0
    tqx = 0.0
    tqy = 0.0
    tqz = 0.0
    for i in range(6):
        ti = (1.0 + dT) * cf * x[12 + i] * x[12 + i]
        fbx += ti * Z[0, i]
        fby += ti * Z[1, i]
        fbz += ti * Z[2, i]
        tqx += ti * TQ[0, i]
        tqy += ti * TQ[1, i]
        tqz += ti * TQ[2, i]

    cph = math.cos(x[3])
    sph = math.sin(x[3])
    cth = math.cos(x[4])
    sth = math.sin(x[4])
    cps = math.cos(x[5])
    sps = math.sin(x[5])

    # R body->inertial, ZYX convention
    r11 = cps * cth
    r12 = cps * sth * sph - sps * cph
    r13 = cps * sth * cph + sps * sph
    r21 = sps * cth
    r22 = sps * sth * sph + cps * cph
    r23 = sps * sth * cph - cps * sph
    r31 = -sth
    r32 = cth * sph
    r33 = cth * cph

    out = np.zeros(NX)
    out[0] = x[6]
    out[1] = x[7]
    out[2] = x[8]

    # Euler-rate kinematics
    tth = sth / cth
    out[3] = x[9] + sph * tth * x[10] + cph * tth * x[11]
    out[4] = cph * x[10] - sph * x[11]
    out[5] = sph / cth * x[10] + cph / cth * x[11]

    drag = (1.0 + dD) * d0 / m
    mg = m if gust_true_mass else m0
    out[6] = (r11 * fbx + r12 * fby + r13 * fbz + zeta[6]) / m - drag * x[6] + gust[0] / mg
    out[7] = (r21 * fbx + r22 * fby + r23 * fbz + zeta[7]) / m - drag * x[7] + gust[1] / mg
    out[8] = (r31 * fbx + r32 * fby + r33 * fbz + zeta[8]) / m - drag * x[8] - grav + gust[2] / mg

    jx = (1.0 + zeta[1]) * par[1]
    jy = (1.0 + zeta[2]) * par[2]
    jz = (1.0 + zeta[3]) * par[3]
    wx = x[9]
    wy = x[10]
    wz = x[11]
    out[9] = (tqx - wy * wz * (jz - jy)) / jx
    out[10] = (tqy - wz * wx * (jx - jz)) / jy
    out[11] = (tqz - wx * wy * (jy - jx)) / jz

    for i in range(6):
        out[12 + i] = u[i]
    return out


@njit
def gtmr_jacobians(x, par, Z, TQ):
    """Analytic Jacobians (df/dx, df/dzeta) at zeta = 0, gust = 0."""
    if abs(x[4]) >= GIMBAL_PITCH_LIMIT:
        raise ValueError("pitch angle too close to gimbal lock")

    m0 = par[0]
    j0x = par[1]
    j0y = par[2]
    j0z = par[3]
    cf = par[4]
    d0 = par[6]

    fbx = 0.0
    fby = 0.0
    fbz = 0.0
    tqx = 0.0
    tqy = 0.0
    tqz = 0.0
    for i in range(6):
        ti = cf * x[12 + i] * x[12 + i]
        fbx += ti * Z[0, i]
        fby += ti * Z[1, i]
        fbz += ti * Z[2, i]
        tqx += ti * TQ[0, i]
        tqy += ti * TQ[1, i]
        tqz += ti * TQ[2, i]

    cph = math.cos(x[3])
    sph = math.sin(x[3])
    cth = math.cos(x[4])
    sth = math.sin(x[4])
    cps = math.cos(x[5])
    sps = math.sin(x[5])

    r11 = cps * cth
    r12 = cps * sth * sph - sps * cph
    r13 = cps * sth * cph + sps * sph
    r21 = sps * cth
    r22 = sps * sth * sph + cps * cph
    r23 = sps * sth * cph - cps * sph
    r31 = -sth
    r32 = cth * sph
    r33 = cth * cph

    A = np.zeros((NX, NX))
    B = np.zeros((NX, NZ))

    # dp/dt = v
    A[0, 6] = 1.0
    A[1, 7] = 1.0
    A[2, 8] = 1.0

    wx = x[9]
    wy = x[10]
    wz = x[11]

    # Euler-rate rows
    tth = sth / cth
    ict = 1.0 / cth
    ict2 = ict * ict
    A[3, 3] = cph * tth * wy - sph * tth * wz
    A[3, 4] = (sph * wy + cph * wz) * ict2
    A[4, 3] = -sph * wy - cph * wz
    A[5, 3] = (cph * wy - sph * wz) * ict
    A[5, 4] = (sph * wy + cph * wz) * sth * ict2
    A[3, 9] = 1.0
    A[3, 10] = sph * tth
    A[3, 11] = cph * tth
    A[4, 10] = cph
    A[4, 11] = -sph
    A[5, 10] = sph * ict
    A[5, 11] = cph * ict

    # translational rows: d vdot / d eta  via dR/deta * f_b
    im = 1.0 / m0
    # dR/dphi columns action on f_b
    A[6, 3] = (r13 * fby - r12 * fbz) * im
    A[7, 3] = (r23 * fby - r22 * fbz) * im
    A[8, 3] = (r33 * fby - r32 * fbz) * im
    # dR/dtheta
    A[6, 4] = (-cps * sth * fbx + cps * cth * sph * fby + cps * cth * cph * fbz) * im
    A[7, 4] = (-sps * sth * fbx + sps * cth * sph * fby + sps * cth * cph * fbz) * im
    A[8, 4] = (-cth * fbx - sth * sph * fby - sth * cph * fbz) * im
    # dR/dpsi
    A[6, 5] = (-r21 * fbx - r22 * fby - r23 * fbz) * im
    A[7, 5] = (r11 * fbx + r12 * fby + r13 * fbz) * im

    dd = d0 * im
    A[6, 6] = -dd
    A[7, 7] = -dd
    A[8, 8] = -dd

    # d vdot / d xi and d omegadot / d xi
    for i in range(6):
        s = 2.0 * cf * x[12 + i] * im
        zx = Z[0, i]
        zy = Z[1, i]
        zz = Z[2, i]
        A[6, 12 + i] = s * (r11 * zx + r12 * zy + r13 * zz)
        A[7, 12 + i] = s * (r21 * zx + r22 * zy + r23 * zz)
        A[8, 12 + i] = s * (r31 * zx + r32 * zy + r33 * zz)
        st = 2.0 * cf * x[12 + i]
        A[9, 12 + i] = st * TQ[0, i] / j0x
        A[10, 12 + i] = st * TQ[1, i] / j0y
        A[11, 12 + i] = st * TQ[2, i] / j0z

    # rotational rows: d omegadot / d omega
    A[9, 10] = -wz * (j0z - j0y) / j0x
    A[9, 11] = -wy * (j0z - j0y) / j0x
    A[10, 9] = -wz * (j0x - j0z) / j0y
    A[10, 11] = -wx * (j0x - j0z) / j0y
    A[11, 9] = -wy * (j0y - j0x) / j0z
    A[11, 10] = -wx * (j0y - j0x) / j0z

    # --- mismatch Jacobian at zeta = 0 ---
    rfx = r11 * fbx + r12 * fby + r13 * fbz
    rfy = r21 * fbx + r22 * fby + r23 * fbz
    rfz = r31 * fbx + r32 * fby + r33 * fbz

    # mass column: vdot = (R f_b + w_b)/m - drag terms; w_b = 0 at zeta0
    B[6, 0] = -rfx * im + dd * x[6]
    B[7, 0] = -rfy * im + dd * x[7]
    B[8, 0] = -rfz * im + dd * x[8]

    # inertia columns
    wdx = (tqx - wy * wz * (j0z - j0y)) / j0x
    wdy = (tqy - wz * wx * (j0x - j0z)) / j0y
    wdz = (tqz - wx * wy * (j0y - j0x)) / j0z
    B[9, 1] = -wdx
    B[9, 2] = wy * wz * j0y / j0x
    B[9, 3] = -wy * wz * j0z / j0x
    B[10, 1] = -wz * wx * j0x / j0y
    B[10, 2] = -wdy
    B[10, 3] = wz * wx * j0z / j0y
    B[11, 1] = wx * wy * j0x / j0z
    B[11, 2] = -wx * wy * j0y / j0z
    B[11, 3] = -wdz

    # thrust-effectiveness column
    B[6, 4] = rfx * im
    B[7, 4] = rfy * im
    B[8, 4] = rfz * im
    B[9, 4] = tqx / j0x
    B[10, 4] = tqy / j0y
    B[11, 4] = tqz / j0z

    # drag column
    B[6, 5] = -dd * x[6]
    B[7, 5] = -dd * x[7]
    B[8, 5] = -dd * x[8]

    # wind-bias columns
    B[6, 6] = im
    B[7, 7] = im
    B[8, 8] = im

    return A, B


@njit
def rk4_step(x, u, zeta, gust, dt, par, Z, TQ, gust_true_mass):
    """Classical RK4 step with u, zeta and gust held constant."""
    k1 = gtmr_rhs(x, u, zeta, gust, par, Z, TQ, gust_true_mass)
    k2 = gtmr_rhs(x + 0.5 * dt * k1, u, zeta, gust, par, Z, TQ, gust_true_mass)
    k3 = gtmr_rhs(x + 0.5 * dt * k2, u, zeta, gust, par, Z, TQ, gust_true_mass)
    k4 = gtmr_rhs(x + dt * k3, u, zeta, gust, par, Z, TQ, gust_true_mass)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@njit
def rollout(x0, us, zeta, gust, dt, par, Z, TQ, gust_true_mass):
    """Integrate a horizon of inputs, returning all intermediate states."""
    n = us.shape[0]
    xs = np.empty((n + 1, NX))
    xs[0] = x0
    for i in range(n):
        xs[i + 1] = rk4_step(xs[i], us[i], zeta, gust, dt, par, Z, TQ, gust_true_mass)
    return xs


@njit
def _mat_nn_mul(A, B, out):
    # out = A @ B for (NX, NX) operands
    for i in range(NX):
        for j in range(NX):
            s = 0.0
            for k in range(NX):
                s += A[i, k] * B[k, j]
            out[i, j] = s


@njit
def sensitivity_step(x, u, Pi, dt, par, Z, TQ):
    """One coupled RK4 step of (x, Pi) along the nominal model.

    Integrates d(Pi)/dt = (df/dx) Pi + df/dzeta alongside the state, both
    evaluated at zeta = 0, gust = 0.
    """
    zz = np.zeros(NZ)
    g0 = np.zeros(3)

    k1x = gtmr_rhs(x, u, zz, g0, par, Z, TQ, False)
    A1, B1 = gtmr_jacobians(x, par, Z, TQ)
    k1p = A1 @ Pi + B1

    x2 = x + 0.5 * dt * k1x
    p2 = Pi + 0.5 * dt * k1p
    k2x = gtmr_rhs(x2, u, zz, g0, par, Z, TQ, False)
    A2, B2 = gtmr_jacobians(x2, par, Z, TQ)
    k2p = A2 @ p2 + B2

    x3 = x + 0.5 * dt * k2x
    p3 = Pi + 0.5 * dt * k2p
    k3x = gtmr_rhs(x3, u, zz, g0, par, Z, TQ, False)
    A3, B3 = gtmr_jacobians(x3, par, Z, TQ)
    k3p = A3 @ p3 + B3

    x4 = x + dt * k3x
    p4 = Pi + dt * k3p
    k4x = gtmr_rhs(x4, u, zz, g0, par, Z, TQ, False)
    A4, B4 = gtmr_jacobians(x4, par, Z, TQ)
    k4p = A4 @ p4 + B4

    x1 = x + (dt / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
    Pi1 = Pi + (dt / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
    return x1, Pi1


@njit
def propagate_sensitivity(xs, us, dt, par, Z, TQ):
    """Propagate the state-sensitivity matrix along a predicted trajectory.

    The matrix is reset to zero at the horizon start and advanced stage by
    stage from the stored shooting states.
    """
    n = us.shape[0]
    out = np.zeros((n + 1, NX, NZ))
    Pi = np.zeros((NX, NZ))
    for i in range(n):
        _, Pi = sensitivity_step(xs[i], us[i], Pi, dt, par, Z, TQ)
        out[i + 1] = Pi
    return out


@njit
def discrete_step_jacobians(x, u, dt, par, Z, TQ):
    """Exact Jacobians of the RK4 map plus output-map data at the stage point.

    Returns (x_next, d x_next/dx, d x_next/du, acc_jac, acc_val) where
    acc_jac/acc_val are the translational-acceleration rows of the continuous
    dynamics at the stage point, used by the tracking cost.
    """
    zz = np.zeros(NZ)
    g0 = np.zeros(3)
    h2 = 0.5 * dt

    k1 = gtmr_rhs(x, u, zz, g0, par, Z, TQ, False)
    A1, _ = gtmr_jacobians(x, par, Z, TQ)

    x2 = x + h2 * k1
    k2 = gtmr_rhs(x2, u, zz, g0, par, Z, TQ, False)
    A2, _ = gtmr_jacobians(x2, par, Z, TQ)

    x3 = x + h2 * k2
    k3 = gtmr_rhs(x3, u, zz, g0, par, Z, TQ, False)
    A3, _ = gtmr_jacobians(x3, par, Z, TQ)

    x4 = x + dt * k3
    k4 = gtmr_rhs(x4, u, zz, g0, par, Z, TQ, False)
    A4, _ = gtmr_jacobians(x4, par, Z, TQ)

    x1 = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    # state chain: Dk = A_s (I + h_s Dk_prev)
    tmp = np.empty((NX, NX))
    D1 = A1
    _mat_nn_mul(A2, D1, tmp)
    D2 = A2 + h2 * tmp
    _mat_nn_mul(A3, D2, tmp)
    D3 = A3 + h2 * tmp
    _mat_nn_mul(A4, D3, tmp)
    D4 = A4 + dt * tmp

    Ad = np.zeros((NX, NX))
    for i in range(NX):
        Ad[i, i] = 1.0
        for j in range(NX):
            Ad[i, j] += (dt / 6.0) * (D1[i, j] + 2.0 * D2[i, j] + 2.0 * D3[i, j] + D4[i, j])

    # input chain: df/du is the selector onto the rotor-rate rows, so
    # A @ S reduces to the rotor-speed columns of A.
    U1 = np.zeros((NX, NU))
    for r in range(NU):
        U1[12 + r, r] = 1.0
    U2 = np.zeros((NX, NU))
    for i in range(NX):
        for r in range(NU):
            U2[i, r] = h2 * A2[i, 12 + r]
    for r in range(NU):
        U2[12 + r, r] += 1.0
    U3 = np.zeros((NX, NU))
    for i in range(NX):
        for r in range(NU):
            s3 = 0.0
            for k in range(NX):
                s3 += A3[i, k] * U2[k, r]
            U3[i, r] = h2 * s3
    for r in range(NU):
        U3[12 + r, r] += 1.0
    U4 = np.zeros((NX, NU))
    for i in range(NX):
        for r in range(NU):
            s4 = 0.0
            for k in range(NX):
                s4 += A4[i, k] * U3[k, r]
            U4[i, r] = dt * s4
    for r in range(NU):
        U4[12 + r, r] += 1.0

    Bd = (dt / 6.0) * (U1 + 2.0 * U2 + 2.0 * U3 + U4)

    acc_jac = np.empty((3, NX))
    for j in range(NX):
        acc_jac[0, j] = A1[6, j]
        acc_jac[1, j] = A1[7, j]
        acc_jac[2, j] = A1[8, j]
    acc_val = np.empty(3)
    acc_val[0] = k1[6]
    acc_val[1] = k1[7]
    acc_val[2] = k1[8]
    return x1, Ad, Bd, acc_jac, acc_val


@njit
def linearize_horizon(xs, us, dt, par, Z, TQ):
    """Linearize the discrete dynamics along a shooting trajectory."""
    n = us.shape[0]
    xn = np.empty((n, NX))
    Ads = np.empty((n, NX, NX))
    Bds = np.empty((n, NX, NU))
    accJ = np.empty((n, 3, NX))
    accv = np.empty((n, 3))
    for i in range(n):
        x1, Ad, Bd, aj, av = discrete_step_jacobians(xs[i], us[i], dt, par, Z, TQ)
        xn[i] = x1
        Ads[i] = Ad
        Bds[i] = Bd
        accJ[i] = aj
        accv[i] = av
    return xn, Ads, Bds, accJ, accv


@njit
def condense(dx0, xs, us, xn, Ads, Bds, accJ, accv, refs, yawref, wref,
             qdiag, qu, qf, dT, jpx, jpy, sbnd, xi_lo, xi_hi, u_max, lamreg):
    """Condense the multiple-shooting QP onto the input increments.

    ``qdiag`` holds 13 output weights: position, velocity, acceleration
    (tracked against ``refs``), body rates (tracked against the constant
    ``wref``) and yaw (tracked against ``yawref``).

    Returns the dense Hessian/gradient over dU, the inequality rows
    C dU <= d with per-row codes (0 clearance, 1/2 rotor-speed hi/lo,
    3/4 input hi/lo) and stage indices, the dynamics defects, and the
    clearance residuals y_i = bound_i - d_T(p_i) at the shooting states.
    """
    n = us.shape[0]
    nv = n * NU
    mrows = n + 12 * (n - 1) + 12 * n

    H = np.zeros((nv, nv))
    g = np.zeros(nv)
    C = np.zeros((mrows, nv))
    dvec = np.empty(mrows)
    codes = np.empty(mrows, dtype=np.int64)
    rstage = np.empty(mrows, dtype=np.int64)

    defects = np.empty((n, NX))
    for i in range(n):
        for j in range(NX):
            defects[i, j] = xn[i, j] - xs[i + 1, j]

    yvals = np.empty(n + 1)
    for i in range(n + 1):
        yvals[i] = sbnd[i] - dT[i]

    Gt = np.zeros((nv, NX))  # Gt[r] = d x_stage / d dU_r (row-major over dU)
    e = dx0.copy()
    tmp = np.empty(NX)
    row = 0

    for i in range(n):
        bi = 6 * i
        # input quadratic cost for stage i
        for r in range(NU):
            H[bi + r, bi + r] += 2.0 * qu[r]
            g[bi + r] += 2.0 * qu[r] * us[i, r]

        # propagate sensitivities to stage i+1
        Ad = Ads[i]
        if bi > 0:
            for rr in range(bi):
                for j in range(NX):
                    s = 0.0
                    for l in range(NX):
                        s += Gt[rr, l] * Ad[j, l]
                    tmp[j] = s
                for j in range(NX):
                    Gt[rr, j] = tmp[j]
        Bd = Bds[i]
        for r in range(NU):
            for j in range(NX):
                Gt[bi + r, j] = Bd[j, r]
        for j in range(NX):
            s = defects[i, j]
            for l in range(NX):
                s += Ad[j, l] * e[l]
            tmp[j] = s
        for j in range(NX):
            e[j] = tmp[j]

        k2 = bi + 6
        ip1 = i + 1

        if ip1 < n:
            # tracking cost at stage ip1: outputs [p, v, vdot, omega, yaw]
            M = np.empty((k2, 13))
            aj = accJ[ip1]
            for rr in range(k2):
                M[rr, 0] = Gt[rr, 0]
                M[rr, 1] = Gt[rr, 1]
                M[rr, 2] = Gt[rr, 2]
                M[rr, 3] = Gt[rr, 6]
                M[rr, 4] = Gt[rr, 7]
                M[rr, 5] = Gt[rr, 8]
                s0 = 0.0
                s1 = 0.0
                s2 = 0.0
                for l in range(NX):
                    gl = Gt[rr, l]
                    s0 += gl * aj[0, l]
                    s1 += gl * aj[1, l]
                    s2 += gl * aj[2, l]
                M[rr, 6] = s0
                M[rr, 7] = s1
                M[rr, 8] = s2
                M[rr, 9] = Gt[rr, 9]
                M[rr, 10] = Gt[rr, 10]
                M[rr, 11] = Gt[rr, 11]
                M[rr, 12] = Gt[rr, 5]
            hv = np.empty(13)
            hv[0] = xs[ip1, 0] + e[0] - refs[ip1, 0]
            hv[1] = xs[ip1, 1] + e[1] - refs[ip1, 1]
            hv[2] = xs[ip1, 2] + e[2] - refs[ip1, 2]
            hv[3] = xs[ip1, 6] + e[6] - refs[ip1, 3]
            hv[4] = xs[ip1, 7] + e[7] - refs[ip1, 4]
            hv[5] = xs[ip1, 8] + e[8] - refs[ip1, 5]
            for c in range(3):
                s = accv[ip1, c] - refs[ip1, 6 + c]
                for l in range(NX):
                    s += aj[c, l] * e[l]
                hv[6 + c] = s
            hv[9] = xs[ip1, 9] + e[9] - wref[0]
            hv[10] = xs[ip1, 10] + e[10] - wref[1]
            hv[11] = xs[ip1, 11] + e[11] - wref[2]
            hv[12] = xs[ip1, 5] + e[5] - yawref[ip1]
            for a in range(k2):
                ga = 0.0
                for c in range(13):
                    ga += M[a, c] * qdiag[c] * hv[c]
                g[a] += 2.0 * ga
                for b in range(a, k2):
                    s = 0.0
                    for c in range(13):
                        s += M[a, c] * qdiag[c] * M[b, c]
                    H[a, b] += 2.0 * s
                    if b != a:
                        H[b, a] += 2.0 * s
        else:
            # terminal position cost
            ef0 = xs[n, 0] + e[0] - refs[n, 0]
            ef1 = xs[n, 1] + e[1] - refs[n, 1]
            ef2 = xs[n, 2] + e[2] - refs[n, 2]
            for a in range(nv):
                g[a] += 2.0 * (Gt[a, 0] * qf[0] * ef0 + Gt[a, 1] * qf[1] * ef1
                               + Gt[a, 2] * qf[2] * ef2)
                for b in range(a, nv):
                    s = (Gt[a, 0] * qf[0] * Gt[b, 0] + Gt[a, 1] * qf[1] * Gt[b, 1]
                         + Gt[a, 2] * qf[2] * Gt[b, 2])
                    H[a, b] += 2.0 * s
                    if b != a:
                        H[b, a] += 2.0 * s

        # clearance row at stage ip1: y + Jyx (G dU + e) <= 0
        jx = jpx[ip1]
        jy = jpy[ip1]
        for rr in range(k2):
            C[row, rr] = jx * Gt[rr, 0] + jy * Gt[rr, 1]
        dvec[row] = -yvals[ip1] - jx * e[0] - jy * e[1]
        codes[row] = 0
        rstage[row] = ip1
        row += 1

        # rotor-speed box at stage ip1 (interior stages only)
        if ip1 < n:
            for r in range(NU):
                base = xs[ip1, 12 + r] + e[12 + r]
                for rr in range(k2):
                    C[row, rr] = Gt[rr, 12 + r]
                dvec[row] = xi_hi - base
                codes[row] = 1
                rstage[row] = ip1
                row += 1
                for rr in range(k2):
                    C[row, rr] = -Gt[rr, 12 + r]
                dvec[row] = base - xi_lo
                codes[row] = 2
                rstage[row] = ip1
                row += 1

        # input box at stage i
        for r in range(NU):
            C[row, bi + r] = 1.0
            dvec[row] = u_max - us[i, r]
            codes[row] = 3
            rstage[row] = i
            row += 1
            C[row, bi + r] = -1.0
            dvec[row] = us[i, r] + u_max
            codes[row] = 4
            rstage[row] = i
            row += 1

    for a in range(nv):
        H[a, a] += lamreg

    return H, g, C, dvec, codes, rstage, defects, yvals


@njit
def expand_step(Ads, Bds, defects, dx0, dU):
    """Recover state increments from input increments after condensing."""
    n = Bds.shape[0]
    dxs = np.empty((n + 1, NX))
    dxs[0] = dx0
    for i in range(n):
        Ad = Ads[i]
        Bd = Bds[i]
        for j in range(NX):
            s = defects[i, j]
            for l in range(NX):
                s += Ad[j, l] * dxs[i, l]
            for r in range(NU):
                s += Bd[j, r] * dU[6 * i + r]
            dxs[i + 1, j] = s
    return dxs


# ---------------------------------------------------------------------------
# dense QP: dual active-set method with Cholesky/Givens factor updates
# ---------------------------------------------------------------------------


@njit
def _chol_lower(H):
    n = H.shape[0]
    L = np.zeros((n, n))
    for j in range(n):
        s = H[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k]
        if s <= 0.0:
            return L, False
        d = math.sqrt(s)
        L[j, j] = d
        for i in range(j + 1, n):
            s = H[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            L[i, j] = s / d
    return L, True


@njit
def _tri_inv_trans(L):
    # J0 = inv(L)^T, upper triangular
    n = L.shape[0]
    J = np.zeros((n, n))
    for j in range(n):
        J[j, j] = 1.0 / L[j, j]
        for i in range(j + 1, n):
            s = 0.0
            for k in range(j, i):
                s += L[i, k] * J[j, k]
            J[j, i] = -s / L[i, i]
    return J


@njit
def solve_qp_dense(H, g, C, d, meq, prefer):
    """Solve min 1/2 z'Hz + g'z  s.t.  C z <= d (rows < meq are equalities).

    Dual active-set method on the strictly convex QP: starts from the
    unconstrained minimum and adds violated constraints one at a time,
    maintaining a Givens-updated factorization of the active set.  Rows in
    ``prefer`` are scanned first when choosing the next violated constraint,
    which keeps warm-started active sets stable across solver calls.

    Returns (z, lam, iterations, status) with status 0 on success, 1 if the
    constraints are infeasible, 2 on iteration overflow, 3 if H is not
    positive definite.  ``lam`` are the multipliers of the rows of C.
    """
    n = H.shape[0]
    m = C.shape[0]

    z = np.zeros(n)
    lam = np.zeros(m)

    L, ok = _chol_lower(H)
    if not ok:
        return z, lam, 0, 3

    # unconstrained minimum: H z = -g
    y = np.empty(n)
    for i in range(n):
        s = -g[i]
        for k in range(i):
            s -= L[i, k] * y[k]
        y[i] = s / L[i, i]
    for i in range(n - 1, -1, -1):
        s = y[i]
        for k in range(i + 1, n):
            s -= L[k, i] * z[k]
        z[i] = s / L[i, i]

    if m == 0:
        return z, lam, 0, 0

    J = _tri_inv_trans(L)

    # internal >= form with normalized rows: a_i = -C_i / nrm, b_i = -d_i / nrm
    nrm = np.empty(m)
    for i in range(m):
        s = 0.0
        for j in range(n):
            s += C[i, j] * C[i, j]
        nrm[i] = math.sqrt(s)

    R = np.zeros((n, n))
    active = np.full(m + 1, -1, dtype=np.int64)
    uact = np.zeros(m + 1)
    sign = np.ones(m + 1)
    inset = np.zeros(m, dtype=np.int64)
    q = 0

    dwork = np.empty(n)
    zdir = np.empty(n)
    rdir = np.empty(n)
    npv = np.empty(n)

    tol = 1e-10
    max_iter = 100 + 20 * m
    iters = 0

    while True:
        # select a violated constraint (equalities first, then prefer hints)
        p = -1
        worst = -tol
        for i in range(meq):
            if inset[i] == 0:
                if nrm[i] <= 1e-14:
                    if abs(d[i]) > 1e-12:
                        return z, lam, iters, 1
                    inset[i] = 2
                    continue
                # equalities always enter the active set
                p = i
                break
        if p == -1:
            for hh in range(prefer.shape[0]):
                i = prefer[hh]
                if i < meq or i >= m or inset[i] != 0:
                    continue
                if nrm[i] <= 1e-14:
                    continue
                s = 0.0
                for j in range(n):
                    s += C[i, j] * z[j]
                viol = (s - d[i]) / nrm[i]
                if viol > tol and viol > worst:
                    worst = viol
                    p = i
            if p == -1:
                worst = tol
                for i in range(meq, m):
                    if inset[i] != 0:
                        continue
                    if nrm[i] <= 1e-14:
                        if d[i] < -1e-12:
                            return z, lam, iters, 1
                        inset[i] = 2
                        continue
                    s = 0.0
                    for j in range(n):
                        s += C[i, j] * z[j]
                    viol = (s - d[i]) / nrm[i]
                    if viol > worst:
                        worst = viol
                        p = i
        if p == -1:
            break  # optimal

        # internal normal of row p (>= form); flip equalities on the
        # satisfied side so the step direction is well defined
        sgn = 1.0
        sp = 0.0
        for j in range(n):
            sp += C[p, j] * z[j]
        sp = (sp - d[p]) / nrm[p]
        if p < meq and sp < 0.0:
            sgn = -1.0
        for j in range(n):
            npv[j] = -sgn * C[p, j] / nrm[p]
        sp_ge = -sgn * sp  # a_p' z - b_p, negative when violated

        u_plus = 0.0
        while True:
            iters += 1
            if iters > max_iter:
                return z, lam, iters, 2

            # d = J^T n+
            for i in range(n):
                s = 0.0
                for j in range(n):
                    s += J[j, i] * npv[j]
                dwork[i] = s
            # primal direction z_dir = J[:, q:] d[q:]
            for i in range(n):
                s = 0.0
                for k in range(q, n):
                    s += J[i, k] * dwork[k]
                zdir[i] = s
            # dual direction r = R[:q,:q]^{-1} d[:q]
            for i in range(q - 1, -1, -1):
                s = dwork[i]
                for k in range(i + 1, q):
                    s -= R[i, k] * rdir[k]
                rdir[i] = s / R[i, i]

            # blocking step over active inequality multipliers
            t1 = 1e300
            lblock = -1
            for k in range(q):
                if active[k] >= meq and rdir[k] > tol:
                    tt = uact[k] / rdir[k]
                    if tt < t1:
                        t1 = tt
                        lblock = k

            zn = 0.0
            for i in range(n):
                zn += zdir[i] * npv[i]
            if zn > 1e-14:
                t2 = -sp_ge / zn
            else:
                t2 = 1e300

            t = t1 if t1 < t2 else t2
            if t >= 1e300:
                return z, lam, iters, 1  # dual unbounded: primal infeasible

            if t2 < 1e300:
                for i in range(n):
                    z[i] += t * zdir[i]
                sp_ge += t * zn
            for k in range(q):
                uact[k] -= t * rdir[k]
            u_plus += t

            if t == t2:
                # add constraint p: update J and R with Givens rotations
                for j in range(n - 1, q, -1):
                    a = dwork[j - 1]
                    b = dwork[j]
                    if abs(b) < 1e-300:
                        continue
                    r = math.hypot(a, b)
                    cg = a / r
                    sg = b / r
                    dwork[j - 1] = r
                    dwork[j] = 0.0
                    for i in range(n):
                        ja = J[i, j - 1]
                        jb = J[i, j]
                        J[i, j - 1] = cg * ja + sg * jb
                        J[i, j] = -sg * ja + cg * jb
                for i in range(q + 1):
                    R[i, q] = dwork[i]
                active[q] = p
                uact[q] = u_plus
                sign[q] = sgn
                inset[p] = 1
                q += 1
                break
            else:
                # drop blocking constraint and iterate with the same p
                ldrop = lblock
                inset[active[ldrop]] = 0
                for k in range(ldrop, q - 1):
                    active[k] = active[k + 1]
                    uact[k] = uact[k + 1]
                    sign[k] = sign[k + 1]
                    for i in range(n):
                        R[i, k] = R[i, k + 1]
                q -= 1
                active[q] = -1
                for j in range(ldrop, q):
                    a = R[j, j]
                    b = R[j + 1, j]
                    if abs(b) > 1e-300:
                        r = math.hypot(a, b)
                        cg = a / r
                        sg = b / r
                        for col in range(j, q):
                            ra = R[j, col]
                            rb = R[j + 1, col]
                            R[j, col] = cg * ra + sg * rb
                            R[j + 1, col] = -sg * ra + cg * rb
                        for i in range(n):
                            ja = J[i, j]
                            jb = J[i, j + 1]
                            J[i, j] = cg * ja + sg * jb
                            J[i, j + 1] = -sg * ja + cg * jb
                for i in range(q + 1):
                    R[i, q] = 0.0
                # refresh slack of p (z may have moved)
                sp_acc = 0.0
                for j in range(n):
                    sp_acc += npv[j] * z[j]
                bpn = -sgn * d[p] / nrm[p]
                sp_ge = sp_acc - bpn

    for k in range(q):
        i = active[k]
        if i >= 0:
            lam[i] = sign[k] * uact[k] / nrm[i]
    return z, lam, iters, 0

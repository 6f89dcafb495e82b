"""Compiled numerical kernels.

Everything here works on plain float arrays over a uniform node grid
``loc_k = k * L / (q - 1)``. The public wrappers in :mod:`fbgforce.rod`,
:mod:`fbgforce.forces` and :mod:`fbgforce.estimator` validate inputs and
build the domain objects; these functions assume valid input.
"""
import numpy as np
from numba import njit

CACHE = True


# --------------------------------------------------------------------------- #
# point force -> nodal density
# --------------------------------------------------------------------------- #
@njit(cache=CACHE)
def distribute(s, fx, fy, length, q, literal):
    """Apportion point forces to node densities (N/m).

    Returns ``(dens_x, dens_y, tip_x, tip_y)``. A force sitting exactly at the
    tip is returned as a tip load instead of a density.
    """
    dx = length / (q - 1)
    dens_x = np.zeros(q)
    dens_y = np.zeros(q)
    tip_x = 0.0
    tip_y = 0.0
    for i in range(s.shape[0]):
        si = s[i]
        if si >= length:
            tip_x += fx[i]
            tip_y += fy[i]
            continue
        j = int(np.floor(si / dx)) + 1
        if j > q - 1:
            j = q - 1
        if j < 1:
            j = 1
        a = (si - (j - 1) * dx) / dx
        if literal:
            w_lo, w_hi = a, 1.0 - a
        else:
            w_lo, w_hi = 1.0 - a, a
        # half-width trapezoid cells at the two ends
        c_lo = 2.0 if j - 1 == 0 else 1.0
        c_hi = 2.0 if j == q - 1 else 1.0
        dens_x[j - 1] += c_lo * w_lo * fx[i] / dx
        dens_x[j] += c_hi * w_hi * fx[i] / dx
        dens_y[j - 1] += c_lo * w_lo * fy[i] / dx
        dens_y[j] += c_hi * w_hi * fy[i] / dx
    return dens_x, dens_y, tip_x, tip_y


# --------------------------------------------------------------------------- #
# simplified local-frame model, integrated tip -> base
# --------------------------------------------------------------------------- #
@njit(cache=CACHE, inline="always")
def _local_rhs(ux, uy, nx, ny, nz, fx, fy, fz, k1, k2):
    return (
        ny / k1,
        -nx / k2,
        -fx - uy * nz,
        -fy + ux * nz,
        -fz - ux * ny + uy * nx,
    )


@njit(cache=CACHE)
def _local_step(y, h, fa_x, fa_y, fa_z, fb_x, fb_y, fb_z, k1, k2):
    ux, uy, nx, ny, nz = y
    fm_x = 0.5 * (fa_x + fb_x)
    fm_y = 0.5 * (fa_y + fb_y)
    fm_z = 0.5 * (fa_z + fb_z)
    a1, a2, a3, a4, a5 = _local_rhs(ux, uy, nx, ny, nz, fa_x, fa_y, fa_z, k1, k2)
    b1, b2, b3, b4, b5 = _local_rhs(
        ux + 0.5 * h * a1, uy + 0.5 * h * a2, nx + 0.5 * h * a3,
        ny + 0.5 * h * a4, nz + 0.5 * h * a5, fm_x, fm_y, fm_z, k1, k2)
    c1, c2, c3, c4, c5 = _local_rhs(
        ux + 0.5 * h * b1, uy + 0.5 * h * b2, nx + 0.5 * h * b3,
        ny + 0.5 * h * b4, nz + 0.5 * h * b5, fm_x, fm_y, fm_z, k1, k2)
    d1, d2, d3, d4, d5 = _local_rhs(
        ux + h * c1, uy + h * c2, nx + h * c3,
        ny + h * c4, nz + h * c5, fb_x, fb_y, fb_z, k1, k2)
    return (
        ux + h / 6.0 * (a1 + 2.0 * b1 + 2.0 * c1 + d1),
        uy + h / 6.0 * (a2 + 2.0 * b2 + 2.0 * c2 + d2),
        nx + h / 6.0 * (a3 + 2.0 * b3 + 2.0 * c3 + d3),
        ny + h / 6.0 * (a4 + 2.0 * b4 + 2.0 * c4 + d4),
        nz + h / 6.0 * (a5 + 2.0 * b5 + 2.0 * c5 + d5),
    )


@njit(cache=CACHE)
def integrate_local(dens_x, dens_y, dens_z, tip_x, tip_y, tip_z, k1, k2, length, substeps):
    """Backward RK4 of the five-state local model. Returns ``(u, n)``, each (q, 2|3)."""
    q = dens_x.shape[0]
    m = substeps
    h = -length / (q - 1) / m
    u = np.zeros((q, 2))
    n = np.zeros((q, 3))
    y = (0.0, 0.0, tip_x, tip_y, tip_z)
    n[q - 1, 0] = tip_x
    n[q - 1, 1] = tip_y
    n[q - 1, 2] = tip_z
    for k in range(q - 1, 0, -1):
        for j in range(m):
            ta = j / m
            tb = (j + 1) / m
            y = _local_step(
                y, h,
                dens_x[k] + ta * (dens_x[k - 1] - dens_x[k]),
                dens_y[k] + ta * (dens_y[k - 1] - dens_y[k]),
                dens_z[k] + ta * (dens_z[k - 1] - dens_z[k]),
                dens_x[k] + tb * (dens_x[k - 1] - dens_x[k]),
                dens_y[k] + tb * (dens_y[k - 1] - dens_y[k]),
                dens_z[k] + tb * (dens_z[k - 1] - dens_z[k]),
                k1, k2)
        u[k - 1, 0] = y[0]
        u[k - 1, 1] = y[1]
        n[k - 1, 0] = y[2]
        n[k - 1, 1] = y[3]
        n[k - 1, 2] = y[4]
    return u, n


# --------------------------------------------------------------------------- #
# rotation helpers
# --------------------------------------------------------------------------- #
@njit(cache=CACHE, inline="always")
def _orthonormalize(R):
    # Newton-Schulz iteration towards the polar factor, i.e. the closest rotation
    for _ in range(2):
        R = 0.5 * R @ (3.0 * np.eye(3) - R.T @ R)
    return R


@njit(cache=CACHE, inline="always")
def _r_hat(R, u):
    """R @ hat(u) without building hat(u)."""
    out = np.empty((3, 3))
    for i in range(3):
        r0, r1, r2 = R[i, 0], R[i, 1], R[i, 2]
        out[i, 0] = r1 * u[2] - r2 * u[1]
        out[i, 1] = r2 * u[0] - r0 * u[2]
        out[i, 2] = r0 * u[1] - r1 * u[0]
    return out


# --------------------------------------------------------------------------- #
# shape from curvature (forward, global frame)
# --------------------------------------------------------------------------- #
@njit(cache=CACHE)
def reconstruct(u, length):
    """Forward RK4 of ``P' = R e3``, ``R' = R hat(u)``; u is (q, 3) node values."""
    q = u.shape[0]
    h = length / (q - 1)
    P = np.zeros((q, 3))
    Rs = np.zeros((q, 3, 3))
    R = np.eye(3)
    p = np.zeros(3)
    Rs[0] = R
    for k in range(q - 1):
        ua = u[k]
        ub = u[k + 1]
        um = 0.5 * (ua + ub)
        kR1 = _r_hat(R, ua)
        kp1 = R[:, 2].copy()
        R2 = R + 0.5 * h * kR1
        kR2 = _r_hat(R2, um)
        kp2 = R2[:, 2].copy()
        R3 = R + 0.5 * h * kR2
        kR3 = _r_hat(R3, um)
        kp3 = R3[:, 2].copy()
        R4 = R + h * kR3
        kR4 = _r_hat(R4, ub)
        kp4 = R4[:, 2].copy()
        p = p + h / 6.0 * (kp1 + 2.0 * kp2 + 2.0 * kp3 + kp4)
        R = _orthonormalize(R + h / 6.0 * (kR1 + 2.0 * kR2 + 2.0 * kR3 + kR4))
        P[k + 1] = p
        Rs[k + 1] = R
    return P, Rs


# --------------------------------------------------------------------------- #
# full global-frame model, integrated base -> tip (shooting)
# --------------------------------------------------------------------------- #
@njit(cache=CACHE, inline="always")
def _global_rhs(R, N, M, f, kinv):
    # u = K^-1 R^T M
    m_loc = R.T @ M
    u = m_loc * kinv
    dR = _r_hat(R, u)
    dP = R[:, 2].copy()
    dN = -(R @ f)
    dM = -np.cross(dP, N)
    return dP, dR, dN, dM


@njit(cache=CACHE)
def integrate_global(n0, m0, dens, kdiag, length, store, substeps):
    """Forward RK4 of the global-frame Cosserat ODEs from a clamped base.

    ``dens`` is (q, 3) local-frame force density (follower load). Returns the
    tip ``(P, R, N, M)`` and, when ``store`` is set, the per-node histories.
    """
    q = dens.shape[0]
    m = substeps
    h = length / (q - 1) / m
    kinv = 1.0 / kdiag
    P = np.zeros(3)
    R = np.eye(3)
    N = n0.copy()
    M = m0.copy()
    nst = q if store else 1
    Ps = np.zeros((nst, 3))
    Rs = np.zeros((nst, 3, 3))
    Ns = np.zeros((nst, 3))
    Ms = np.zeros((nst, 3))
    Rs[0] = R
    Ns[0] = N
    Ms[0] = M
    for k in range(q - 1):
        for j in range(m):
            fa = dens[k] + (j / m) * (dens[k + 1] - dens[k])
            fb = dens[k] + ((j + 1) / m) * (dens[k + 1] - dens[k])
            fm = 0.5 * (fa + fb)
            p1, r1, n1, m1 = _global_rhs(R, N, M, fa, kinv)
            R2 = R + 0.5 * h * r1
            N2 = N + 0.5 * h * n1
            M2 = M + 0.5 * h * m1
            p2, r2, n2, m2 = _global_rhs(R2, N2, M2, fm, kinv)
            R3 = R + 0.5 * h * r2
            N3 = N + 0.5 * h * n2
            M3 = M + 0.5 * h * m2
            p3, r3, n3, m3 = _global_rhs(R3, N3, M3, fm, kinv)
            R4 = R + h * r3
            N4 = N + h * n3
            M4 = M + h * m3
            p4, r4, n4, m4 = _global_rhs(R4, N4, M4, fb, kinv)
            P = P + h / 6.0 * (p1 + 2.0 * p2 + 2.0 * p3 + p4)
            R = _orthonormalize(R + h / 6.0 * (r1 + 2.0 * r2 + 2.0 * r3 + r4))
            N = N + h / 6.0 * (n1 + 2.0 * n2 + 2.0 * n3 + n4)
            M = M + h / 6.0 * (m1 + 2.0 * m2 + 2.0 * m3 + m4)
        if store:
            Ps[k + 1] = P
            Rs[k + 1] = R
            Ns[k + 1] = N
            Ms[k + 1] = M
    return P, R, N, M, Ps, Rs, Ns, Ms


@njit(cache=CACHE)
def _tip_residual(x, dens, tip_f, tip_m, kdiag, length, substeps):
    P, R, N, M, _, _, _, _ = integrate_global(x[:3], x[3:], dens, kdiag, length, False, substeps)
    r = np.empty(6)
    r[:3] = N - R @ tip_f
    r[3:] = M - R @ tip_m
    return r


@njit(cache=CACHE)
def _solve_small(A, b):
    """Gaussian elimination with partial pivoting; ``ok`` is False when singular."""
    n = b.shape[0]
    A = A.copy()
    b = b.copy()
    scale = 0.0
    for i in range(n):
        for j in range(n):
            scale = max(scale, abs(A[i, j]))
    if scale == 0.0:
        return b, False
    for c in range(n):
        p = c
        for r in range(c + 1, n):
            if abs(A[r, c]) > abs(A[p, c]):
                p = r
        if abs(A[p, c]) <= 1e-14 * scale:
            return b, False
        if p != c:
            for j in range(n):
                A[c, j], A[p, j] = A[p, j], A[c, j]
            b[c], b[p] = b[p], b[c]
        for r in range(c + 1, n):
            m = A[r, c] / A[c, c]
            for j in range(c, n):
                A[r, j] -= m * A[c, j]
            b[r] -= m * b[c]
    x = np.zeros(n)
    for i in range(n - 1, -1, -1):
        acc = b[i]
        for j in range(i + 1, n):
            acc -= A[i, j] * x[j]
        x[i] = acc / A[i, i]
    return x, True


@njit(cache=CACHE)
def rigid_guess(dens, tip_f, tip_m, length):
    """Base internal force/moment of the undeformed rod carrying the same loads."""
    q = dens.shape[0]
    h = length / (q - 1)
    n0 = tip_f.copy()
    m0 = tip_m.copy()
    m0[0] += -length * tip_f[1]
    m0[1] += length * tip_f[0]
    for k in range(q):
        w = h if 0 < k < q - 1 else 0.5 * h
        s = k * h
        n0 += w * dens[k]
        m0[0] += -s * w * dens[k, 1]
        m0[1] += s * w * dens[k, 0]
    return np.concatenate((n0, m0))


@njit(cache=CACHE)
def shoot(dens, tip_f, tip_m, kdiag, length, x0, tol, max_iter, substeps):
    """Levenberg-Marquardt on the six unknown base loads.

    Returns ``(x, residual_norm, iterations, n_integrations)``.
    """
    x = x0.copy()
    r = _tip_residual(x, dens, tip_f, tip_m, kdiag, length, substeps)
    cost = np.sqrt(np.sum(r * r))
    n_int = 1
    lam = 1e-6
    it = 0
    J = np.empty((6, 6))
    while it < max_iter and cost >= tol:
        it += 1
        for j in range(6):
            step = 1e-7 * max(1.0, abs(x[j]))
            xp = x.copy()
            xp[j] += step
            J[:, j] = (_tip_residual(xp, dens, tip_f, tip_m, kdiag, length, substeps) - r) / step
        n_int += 6
        JtJ = J.T @ J
        g = J.T @ r
        improved = False
        while lam < 1e12:
            A = JtJ.copy()
            for i in range(6):
                A[i, i] += lam * max(JtJ[i, i], 1e-30)
            dx, ok = _solve_small(A, -g)
            if not ok:
                lam *= 10.0
                continue
            xn = x + dx
            rn = _tip_residual(xn, dens, tip_f, tip_m, kdiag, length, substeps)
            n_int += 1
            cn = np.sqrt(np.sum(rn * rn))
            if cn < cost:
                x, r, cost = xn, rn, cn
                lam = max(lam / 10.0, 1e-12)
                improved = True
                break
            lam *= 10.0
        if not improved:
            break
    return x, cost, it, n_int


@njit(cache=CACHE)
def local_curvature(Rs, Ms, kdiag):
    q = Rs.shape[0]
    u = np.empty((q, 3))
    for k in range(q):
        u[k] = (Rs[k].T @ Ms[k]) / kdiag
    return u


# --------------------------------------------------------------------------- #
# estimation objectives
# --------------------------------------------------------------------------- #
@njit(cache=CACHE)
def _unpack(params):
    h = params.shape[0] // 3
    s = np.empty(h)
    fx = np.empty(h)
    fy = np.empty(h)
    for i in range(h):
        s[i] = params[3 * i]
        fx[i] = params[3 * i + 1]
        fy[i] = params[3 * i + 2]
    return s, fx, fy


@njit(cache=CACHE)
def residuals_simplified(params, sg, mx, my, length, q, k1, k2, literal):
    s, fx, fy = _unpack(params)
    dx_, dy_, tx, ty = distribute(s, fx, fy, length, q, literal)
    u, _ = integrate_local(dx_, dy_, np.zeros(q), tx, ty, 0.0, k1, k2, length, 1)
    loc = np.linspace(0.0, length, q)
    g = sg.shape[0]
    r = np.empty(2 * g)
    r[:g] = np.interp(sg, loc, u[:, 0]) - mx
    r[g:] = np.interp(sg, loc, u[:, 1]) - my
    return r


@njit(cache=CACHE)
def residuals_bvp(params, sg, mx, my, length, q, kdiag, literal, tol, max_iter):
    s, fx, fy = _unpack(params)
    dx_, dy_, tx, ty = distribute(s, fx, fy, length, q, literal)
    dens = np.zeros((q, 3))
    dens[:, 0] = dx_
    dens[:, 1] = dy_
    tip_f = np.array([tx, ty, 0.0])
    tip_m = np.zeros(3)
    x0 = rigid_guess(dens, tip_f, tip_m, length)
    x, _, _, _ = shoot(dens, tip_f, tip_m, kdiag, length, x0, tol, max_iter, 1)
    _, _, _, _, _, Rs, _, Ms = integrate_global(x[:3], x[3:], dens, kdiag, length, True, 1)
    u = local_curvature(Rs, Ms, kdiag)
    loc = np.linspace(0.0, length, q)
    g = sg.shape[0]
    r = np.empty(2 * g)
    r[:g] = np.interp(sg, loc, u[:, 0]) - mx
    r[g:] = np.interp(sg, loc, u[:, 1]) - my
    return r

"""Compiled per-face and per-cell loops for the residual hot path.

These mirror the array code in :mod:`hllc`, :mod:`spatial` and
:mod:`stepper` operation for operation.  They never raise: a non-zero
status tells the caller to rerun the array path, which raises the proper
typed error.
"""

from __future__ import annotations

import math

import numpy as np

try:
    import numba

    def _jit(fn):
        return numba.njit(cache=True, nogil=True, error_model="numpy")(fn)

    AVAILABLE = True
except ImportError:  # pragma: no cover
    AVAILABLE = False

    def _jit(fn):
        return fn

# keep in step with hllc._SERIES_EPS / _SERIES_TERMS
_SERIES_EPS = 0.25
_SERIES_TERMS = 12
_EVEN = 1.0 / (2.0 * np.arange(_SERIES_TERMS) + 1.0)
_ODD = 1.0 / (2.0 * np.arange(_SERIES_TERMS) + 3.0)

# keep in step with spatial._LIMIT_TOL
_LIMIT_TOL = 1e-13

OK = 0
BAD_STATE = 1
HYPERBOLICITY = 2
COLLAPSE = 3
STAR_DENSITY = 4


@_jit
def _path_avg(rho_a, m_a, rho_b, m_b):
    d_rho = rho_b - rho_a
    d_m = m_b - m_a
    rho_m = 0.5 * (rho_a + rho_b)
    m_m = 0.5 * (m_a + m_b)
    eps = d_rho / rho_m
    if abs(eps) <= _SERIES_EPS:
        e2 = (0.5 * eps) ** 2
        even = 0.0
        odd = 0.0
        for j in range(_SERIES_TERMS - 1, -1, -1):
            even = even * e2 + _EVEN[j]
            odd = odd * e2 + _ODD[j]
        return (m_m * even - d_m * (0.25 * eps) * odd) / rho_m
    return d_m / d_rho + (m_a * rho_b - rho_a * m_b) * math.log(rho_b / rho_a) / d_rho**2


@_jit
def face_fluxes(UL, UR, normal, length, is_ghost, kappa_face, beta, sigma, rho1, rho2,
                left, right, n_cells, R, out_fl, out_fr):
    """Accumulate convective flux plus fluctuation into ``R`` for every flux face.

    Returns ``(status, face, n_degenerate)``.  ``out_fl``/``out_fr`` receive
    the per-face left and right contributions in the global frame.
    """
    drho = rho1 - rho2
    nf = UL.shape[0]
    n_deg = 0
    uh_l = np.empty(4)
    uh_r = np.empty(4)
    usl = np.empty(4)
    usr = np.empty(4)
    dm = np.empty(4)
    dp = np.empty(4)
    for f in range(nf):
        nx = normal[f, 0]
        ny = normal[f, 1]
        # global-frame states (wall right state mirrors the left one)
        a0 = UL[f, 0]
        a1 = UL[f, 1]
        a2 = UL[f, 2]
        a3 = UL[f, 3]
        if is_ghost[f]:
            mn = a1 * nx + a2 * ny
            b0 = a0
            b1 = a1 - 2 * mn * nx
            b2 = a2 - 2 * mn * ny
            b3 = a3
            UR[f, 0] = b0
            UR[f, 1] = b1
            UR[f, 2] = b2
            UR[f, 3] = b3
        else:
            b0 = UR[f, 0]
            b1 = UR[f, 1]
            b2 = UR[f, 2]
            b3 = UR[f, 3]
        uh_l[0] = a0
        uh_l[1] = nx * a1 + ny * a2
        uh_l[2] = -ny * a1 + nx * a2
        uh_l[3] = a3
        uh_r[0] = b0
        uh_r[1] = nx * b1 + ny * b2
        uh_r[2] = -ny * b1 + nx * b2
        uh_r[3] = b3
        kap = kappa_face[f]

        rho_l = rho2 + drho * uh_l[3]
        rho_r = rho2 + drho * uh_r[3]
        if not (rho_l > 0) or not (rho_r > 0):
            return BAD_STATE, f, n_deg
        m_l = uh_l[1]
        m_r = uh_r[1]
        u_l = m_l / rho_l
        u_r = m_r / rho_r
        psi_l = uh_l[3]
        psi_r = uh_r[3]
        p_l = beta * uh_l[0]
        p_r = beta * uh_r[0]

        ur_l = (1.0 + rho2 / (2.0 * rho_l)) * u_l
        ur_r = (1.0 + rho2 / (2.0 * rho_r)) * u_r
        rad_l = (ur_l - u_l) ** 2 + beta - sigma * kap * psi_l / rho_l
        rad_r = (ur_r - u_r) ** 2 + beta - sigma * kap * psi_r / rho_r
        if not (rad_l > 0) or not (rad_r > 0):
            return HYPERBOLICITY, f, n_deg
        as_l = math.sqrt(rad_l)
        as_r = math.sqrt(rad_r)
        s_l = min(ur_l - as_l, ur_r - as_r)
        s_r = max(ur_l + as_l, ur_r + as_r)

        num = (s_l * m_l - s_r * m_r + (m_r * u_r + p_r) - (m_l * u_l + p_l)
               - sigma * kap * (psi_r - psi_l))
        den = s_l * rho_l - s_r * rho_r + drho * (u_r * psi_r - u_l * psi_l)
        scale = abs(s_l) * rho_l + abs(s_r) * rho_r
        if abs(den) <= 1e-12 * scale:
            s_star = 0.5 * (u_l + u_r)
            n_deg += 1
        else:
            s_star = num / den
        speed_scale = max(abs(s_l), abs(s_r))
        if (abs(s_l - s_star) <= 1e-12 * speed_scale
                or abs(s_r - s_star) <= 1e-12 * speed_scale):
            return COLLAPSE, f, n_deg

        fac_l = (s_l - u_l) / (s_l - s_star)
        fac_r = (s_r - u_r) / (s_r - s_star)
        psi_sl = psi_l * fac_l
        psi_sr = psi_r * fac_r
        mt_sl = uh_l[2] * fac_l
        mt_sr = uh_r[2] * fac_r
        rho_sl = rho2 + drho * psi_sl
        rho_sr = rho2 + drho * psi_sr
        if not (rho_sl > 0) or not (rho_sr > 0):
            return STAR_DENSITY, f, n_deg
        ub_l = _path_avg(rho_l, m_l, rho_sl, rho_sl * s_star)
        ub_r = _path_avg(rho_r, m_r, rho_sr, rho_sr * s_star)
        usl[0] = uh_l[0] + (rho_sl * (s_star - ub_l) - rho_l * (u_l - ub_l)) / (s_l - ub_l)
        usr[0] = uh_r[0] + (rho_sr * (s_star - ub_r) - rho_r * (u_r - ub_r)) / (s_r - ub_r)
        usl[1] = rho_sl * s_star
        usr[1] = rho_sr * s_star
        usl[2] = mt_sl
        usr[2] = mt_sr
        usl[3] = psi_sl
        usr[3] = psi_sr

        for c in range(4):
            w_l = s_l * (usl[c] - uh_l[c])
            w_c = s_star * (usr[c] - usl[c])
            w_r = s_r * (uh_r[c] - usr[c])
            if s_l >= 0:
                dm[c] = 0.0
                dp[c] = w_l + w_c + w_r
            elif s_star >= 0:
                dm[c] = w_l
                dp[c] = w_c + w_r
            elif s_r > 0:
                dm[c] = w_l + w_c
                dp[c] = w_r
            else:
                dm[c] = w_l + w_c + w_r
                dp[c] = 0.0

        # F_c in the face frame, then back to the global frame
        gl0 = m_l + dm[0]
        gl1 = m_l * u_l + p_l + dm[1]
        gl2 = uh_l[2] * u_l + dm[2]
        gl3 = u_l * psi_l + dm[3]
        gr0 = m_r - dp[0]
        gr1 = m_r * u_r + p_r - dp[1]
        gr2 = uh_r[2] * u_r - dp[2]
        gr3 = u_r * psi_r - dp[3]
        ln = length[f]
        fl0 = gl0 * ln
        fl1 = (nx * gl1 - ny * gl2) * ln
        fl2 = (ny * gl1 + nx * gl2) * ln
        fl3 = gl3 * ln
        fr0 = gr0 * ln
        fr1 = (nx * gr1 - ny * gr2) * ln
        fr2 = (ny * gr1 + nx * gr2) * ln
        fr3 = gr3 * ln
        out_fl[f, 0] = fl0
        out_fl[f, 1] = fl1
        out_fl[f, 2] = fl2
        out_fl[f, 3] = fl3
        out_fr[f, 0] = fr0
        out_fr[f, 1] = fr1
        out_fr[f, 2] = fr2
        out_fr[f, 3] = fr3
    # scatter in face order so the sums match the sparse accumulation order
    for f in range(nf):
        i = left[f]
        for c in range(4):
            R[i, c] += out_fl[f, c]
    for f in range(nf):
        if not is_ghost[f]:
            j = right[f]
            for c in range(4):
                R[j, c] -= out_fr[f, c]
    return OK, -1, n_deg


@_jit
def limit(values, values_ext, raw, neighbors, offsets, phi_out, grad_out):
    """Barth-Jespersen factors per cell and component; limited gradients out.

    ``raw`` and ``grad_out`` have shape (N, m, 2).
    """
    n, m = values.shape
    k = neighbors.shape[1]
    kf = offsets.shape[1]
    vmax = np.empty(m)
    vmin = np.empty(m)
    for i in range(n):
        for c in range(m):
            vmax[c] = values[i, c]
            vmin[c] = values[i, c]
        for s in range(k):
            j = neighbors[i, s]
            for c in range(m):
                w = values_ext[j, c]
                if w > vmax[c]:
                    vmax[c] = w
                if w < vmin[c]:
                    vmin[c] = w
        for c in range(m):
            v = values[i, c]
            phi = 1.0
            up = vmax[c] - v
            dn = vmin[c] - v
            tol = _LIMIT_TOL * (abs(v) + (vmax[c] - vmin[c]))
            for f in range(kf):
                d = offsets[i, f, 0] * raw[i, c, 0] + offsets[i, f, 1] * raw[i, c, 1]
                if d > tol:
                    r = up / d
                elif d < -tol:
                    r = dn / d
                else:
                    r = 1.0
                if not math.isfinite(r):
                    r = 1.0
                if r < 0.0:
                    r = 0.0
                elif r > 1.0:
                    r = 1.0
                if r < phi:
                    phi = r
            phi_out[i, c] = phi
            grad_out[i, c, 0] = raw[i, c, 0] * phi
            grad_out[i, c, 1] = raw[i, c, 1] * phi


@_jit
def reconstruct(U, U_ext, grad, left, right, mid, centroids, right_center, is_ghost,
                rho1, rho2, UL, UR):
    """Limited linear face states; returns the number of first-order fallbacks."""
    drho = rho1 - rho2
    nf = left.shape[0]
    nbad = 0
    for f in range(nf):
        i = left[f]
        j = right[f]
        dlx = mid[f, 0] - centroids[i, 0]
        dly = mid[f, 1] - centroids[i, 1]
        for c in range(4):
            UL[f, c] = U[i, c] + (grad[i, c, 0] * dlx + grad[i, c, 1] * dly)
            UR[f, c] = U_ext[j, c]
        bad = not (rho2 + drho * UL[f, 3] > 0)
        if not is_ghost[f]:
            drx = mid[f, 0] - right_center[f, 0]
            dry = mid[f, 1] - right_center[f, 1]
            for c in range(4):
                UR[f, c] = U_ext[j, c] + (grad[j, c, 0] * drx + grad[j, c, 1] * dry)
            bad = bad or not (rho2 + drho * UR[f, 3] > 0)
        if bad:
            nbad += 1
            for c in range(4):
                UL[f, c] = U[i, c]
                UR[f, c] = U_ext[j, c]
    return nbad


@_jit
def regularization(px, ix, dx, py, iy, dy, psi_ext, UL, UR, gamma, eps, delta,
                   normal, length, is_ghost, left, right, R, out):
    """Regularization flux on open faces, subtracted from the psi residual.

    ``(px, ix, dx)`` and ``(py, iy, dy)`` are the CSR arrays of the diamond
    face-gradient operators.
    """
    nf = left.shape[0]
    for f in range(nf):
        if is_ghost[f]:
            out[f] = 0.0
            continue
        g0 = 0.0
        for q in range(px[f], px[f + 1]):
            g0 += dx[q] * psi_ext[ix[q]]
        g1 = 0.0
        for q in range(py[f], py[f + 1]):
            g1 += dy[q] * psi_ext[iy[q]]
        g2 = g0 * g0 + g1 * g1
        den = math.sqrt(g2 + eps * math.exp(-delta * eps**2 * g2))
        n0 = g0 / den
        n1 = g1 / den
        gn = g0 * n0 + g1 * n1
        nn = n0 * n0 + n1 * n1
        psi = 0.5 * (UL[f, 3] + UR[f, 3])
        c = psi * (1.0 - psi)
        f0 = eps * gn * n0 + (1.0 - nn) * eps * g0 - c * n0
        f1 = eps * gn * n1 + (1.0 - nn) * eps * g1 - c * n1
        out[f] = gamma * (f0 * normal[f, 0] + f1 * normal[f, 1]) * length[f]
    for f in range(nf):
        R[left[f], 3] -= out[f]
    for f in range(nf):
        if not is_ghost[f]:
            R[right[f], 3] += out[f]


@_jit
def volume_term(U, grad, kappa, areas, sigma, rho1, rho2, R):
    """Add [B_x dU/dx + B_y dU/dy] * area to ``R`` (limited gradients)."""
    drho = rho1 - rho2
    for i in range(U.shape[0]):
        rho = rho2 + drho * U[i, 3]
        u = U[i, 1] / rho
        v = U[i, 2] / rho
        sk = sigma * kappa[i]
        a = areas[i]
        R[i, 0] += (u * (grad[i, 0, 0] - drho * grad[i, 3, 0])
                    + v * (grad[i, 0, 1] - drho * grad[i, 3, 1])) * a
        R[i, 1] += -sk * grad[i, 3, 0] * a
        R[i, 2] += -sk * grad[i, 3, 1] * a


@_jit
def max_speed(U, rho1, rho2):
    drho = rho1 - rho2
    best = 0.0
    for i in range(U.shape[0]):
        rho = rho2 + drho * U[i, 3]
        s = math.hypot(U[i, 1] / rho, U[i, 2] / rho)
        if s > best:
            best = s
    return best

"""HLLC-type path-conservative fluctuation splitting at a face.

States passed in here are already rotated into the face frame: slot 1 holds
the normal momentum and slot 2 the tangential momentum.  The path joining
two states is the straight segment in conserved variables, so every path
integral of the non-conservative matrix reduces to the average of
``rho*u / rho`` along a segment on which both numerator and denominator
vary linearly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AdmissibilityError, WaveCollapseError
from .model import Params, eigen_data, flux_x, mixture_density

# below this relative density jump the log form loses digits; use the series
_SERIES_EPS = 0.25
_SERIES_TERMS = 12
_EVEN = 1.0 / (2.0 * np.arange(_SERIES_TERMS) + 1.0)
_ODD = 1.0 / (2.0 * np.arange(_SERIES_TERMS) + 3.0)


def path_avg_velocity(rho_a, m_a, rho_b, m_b):
    """Integral over s in [0, 1] of m(s)/rho(s) with m, rho linear in s."""
    rho_a, m_a, rho_b, m_b = np.broadcast_arrays(
        *(np.asarray(x, dtype=float) for x in (rho_a, m_a, rho_b, m_b))
    )
    if np.any(~(rho_a > 0)) or np.any(~(rho_b > 0)):
        raise AdmissibilityError("path average requires positive densities")
    d_rho = rho_b - rho_a
    d_m = m_b - m_a
    rho_m = 0.5 * (rho_a + rho_b)
    m_m = 0.5 * (m_a + m_b)
    eps = d_rho / rho_m
    small = np.abs(eps) <= _SERIES_EPS

    # expansion about the segment midpoint; only even/odd moments survive
    e2 = (0.5 * eps) ** 2
    even = np.zeros_like(eps)
    odd = np.zeros_like(eps)
    for j in range(_SERIES_TERMS - 1, -1, -1):
        even = even * e2 + _EVEN[j]
        odd = odd * e2 + _ODD[j]
    series = (m_m * even - d_m * (0.25 * eps) * odd) / rho_m

    with np.errstate(divide="ignore", invalid="ignore"):
        safe = np.where(small, 1.0, d_rho)
        closed = d_m / safe + (m_a * rho_b - rho_a * m_b) * np.log(rho_b / rho_a) / safe**2
    out = np.where(small, series, closed)
    return out if out.ndim else float(out)


def path_avg_nc_matrix(U_minus, U_plus, kappa, params: Params):
    """Segment-path average of B_x between two face-frame states."""
    U_minus = np.asarray(U_minus, dtype=float)
    U_plus = np.asarray(U_plus, dtype=float)
    ubar = path_avg_velocity(
        mixture_density(U_minus[..., 3], params), U_minus[..., 1],
        mixture_density(U_plus[..., 3], params), U_plus[..., 1],
    )
    B = np.zeros(np.broadcast(U_minus[..., 0], U_plus[..., 0]).shape + (4, 4))
    B[..., 0, 0] = ubar
    B[..., 0, 3] = -params.drho * ubar
    B[..., 1, 3] = -params.sigma * np.asarray(kappa, dtype=float)
    return B


def grh_residual(U_minus, U_plus, xi, kappa, params: Params):
    """Generalized Rankine-Hugoniot residual along the segment path."""
    U_minus = np.asarray(U_minus, dtype=float)
    U_plus = np.asarray(U_plus, dtype=float)
    jump = U_plus - U_minus
    B = path_avg_nc_matrix(U_minus, U_plus, kappa, params)
    return (
        flux_x(U_plus, params) - flux_x(U_minus, params)
        + np.einsum("...ij,...j->...i", B, jump)
        - np.asarray(xi, dtype=float)[..., None] * jump
    )


def wave_speeds(U_hat_L, U_hat_R, kappa, params: Params):
    """Davis estimates S_L = min(lambda_1), S_R = max(lambda_4)."""
    lam_l = eigen_data(U_hat_L, kappa, params).lam
    lam_r = eigen_data(U_hat_R, kappa, params).lam
    return np.minimum(lam_l[0], lam_r[0]), np.maximum(lam_l[3], lam_r[3])


@dataclass
class StarStates:
    s_l: np.ndarray
    s_r: np.ndarray
    s_star: np.ndarray
    pbeta_star_l: np.ndarray
    pbeta_star_r: np.ndarray
    mom_t_star_l: np.ndarray
    mom_t_star_r: np.ndarray
    psi_star_l: np.ndarray
    psi_star_r: np.ndarray
    rho_star_l: np.ndarray
    rho_star_r: np.ndarray
    u_avg_l: np.ndarray
    u_avg_r: np.ndarray
    n_degenerate: int = 0

    @property
    def U_star_l(self):
        return np.stack(
            [self.pbeta_star_l, self.rho_star_l * self.s_star, self.mom_t_star_l,
             self.psi_star_l], axis=-1)

    @property
    def U_star_r(self):
        return np.stack(
            [self.pbeta_star_r, self.rho_star_r * self.s_star, self.mom_t_star_r,
             self.psi_star_r], axis=-1)


@dataclass
class FluctuationPair:
    d_minus: np.ndarray
    d_plus: np.ndarray
    star: StarStates


def _first(mask):
    idx = np.flatnonzero(np.atleast_1d(mask))
    return int(idx[0]) if idx.size else None


def star_states(U_hat_L, U_hat_R, kappa, params: Params) -> StarStates:
    UL = np.asarray(U_hat_L, dtype=float)
    UR = np.asarray(U_hat_R, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    s_l, s_r = wave_speeds(UL, UR, kappa, params)

    rho_l = mixture_density(UL[..., 3], params)
    rho_r = mixture_density(UR[..., 3], params)
    m_l, m_r = UL[..., 1], UR[..., 1]
    u_l, u_r = m_l / rho_l, m_r / rho_r
    psi_l, psi_r = UL[..., 3], UR[..., 3]
    p_l, p_r = params.beta * UL[..., 0], params.beta * UR[..., 0]

    num = (s_l * m_l - s_r * m_r + (m_r * u_r + p_r) - (m_l * u_l + p_l)
           - params.sigma * kappa * (psi_r - psi_l))
    den = s_l * rho_l - s_r * rho_r + params.drho * (u_r * psi_r - u_l * psi_l)
    scale = np.abs(s_l) * rho_l + np.abs(s_r) * rho_r
    degenerate = np.abs(den) <= 1e-12 * scale
    with np.errstate(divide="ignore", invalid="ignore"):
        s_star = np.where(degenerate, 0.5 * (u_l + u_r), num / np.where(degenerate, 1.0, den))

    speed_scale = np.maximum(np.abs(s_l), np.abs(s_r))
    collapse = (np.abs(s_l - s_star) <= 1e-12 * speed_scale) | (
        np.abs(s_r - s_star) <= 1e-12 * speed_scale)
    if np.any(collapse):
        bad = _first(collapse)
        raise WaveCollapseError(f"outer wave collapses onto the contact at face {bad}", face=bad)

    psi_sl = psi_l * (s_l - u_l) / (s_l - s_star)
    psi_sr = psi_r * (s_r - u_r) / (s_r - s_star)
    mt_sl = UL[..., 2] * (s_l - u_l) / (s_l - s_star)
    mt_sr = UR[..., 2] * (s_r - u_r) / (s_r - s_star)
    rho_sl = mixture_density(psi_sl, params)
    rho_sr = mixture_density(psi_sr, params)
    if np.any(~(rho_sl > 0)) or np.any(~(rho_sr > 0)):
        bad = _first(~((rho_sl > 0) & (rho_sr > 0)))
        raise AdmissibilityError(f"non-positive star-state density at face {bad}", face=bad)

    ubar_l = path_avg_velocity(rho_l, m_l, rho_sl, rho_sl * s_star)
    ubar_r = path_avg_velocity(rho_r, m_r, rho_sr, rho_sr * s_star)
    pb_sl = UL[..., 0] + (rho_sl * (s_star - ubar_l) - rho_l * (u_l - ubar_l)) / (s_l - ubar_l)
    pb_sr = UR[..., 0] + (rho_sr * (s_star - ubar_r) - rho_r * (u_r - ubar_r)) / (s_r - ubar_r)

    return StarStates(
        s_l=s_l, s_r=s_r, s_star=s_star,
        pbeta_star_l=pb_sl, pbeta_star_r=pb_sr,
        mom_t_star_l=mt_sl, mom_t_star_r=mt_sr,
        psi_star_l=psi_sl, psi_star_r=psi_sr,
        rho_star_l=rho_sl, rho_star_r=rho_sr,
        u_avg_l=ubar_l, u_avg_r=ubar_r,
        n_degenerate=int(np.count_nonzero(degenerate)),
    )


def split_fluctuations(U_hat_L, U_hat_R, kappa, params: Params) -> FluctuationPair:
    """Left/right contributions D-, D+ of the interface fluctuation."""
    UL = np.asarray(U_hat_L, dtype=float)
    UR = np.asarray(U_hat_R, dtype=float)
    st = star_states(UL, UR, kappa, params)
    w_l = st.s_l[..., None] * (st.U_star_l - UL)
    w_c = st.s_star[..., None] * (st.U_star_r - st.U_star_l)
    w_r = st.s_r[..., None] * (UR - st.U_star_r)

    s_l = st.s_l[..., None]
    s_c = st.s_star[..., None]
    s_r = st.s_r[..., None]
    zero = np.zeros_like(w_l)
    d_minus = np.where(
        s_l >= 0, zero,
        np.where(s_c >= 0, w_l, np.where(s_r > 0, w_l + w_c, w_l + w_c + w_r)))
    d_plus = np.where(
        s_l >= 0, w_l + w_c + w_r,
        np.where(s_c >= 0, w_c + w_r, np.where(s_r > 0, w_r, zero)))
    return FluctuationPair(d_minus=d_minus, d_plus=d_plus, star=st)

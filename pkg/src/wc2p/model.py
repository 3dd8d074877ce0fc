"""State vectors, material mixing and the eigenstructure of the inviscid system.

Conserved states are stored as arrays whose last axis has length 4::

    U = (p/beta, rho*u, rho*v, psi)

All functions broadcast over leading axes so the same code serves a single
face and the whole mesh.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AdmissibilityError, ConfigError, HyperbolicityError


@dataclass(frozen=True)
class Params:
    """Physical and numerical parameters of a run (SI units)."""

    beta: float
    sigma: float = 0.0
    gravity: tuple[float, float] = (0.0, 0.0)
    rho1: float = 1.0
    rho2: float = 1.0
    mu1: float = 0.0
    mu2: float = 0.0
    d: float = 0.1
    delta: float = 10.0
    cfl: float = 0.9

    def __post_init__(self):
        object.__setattr__(self, "gravity", tuple(float(g) for g in self.gravity))
        checks = [
            ("beta", self.beta > 0, "must be positive"),
            ("rho1", self.rho1 > 0, "must be positive"),
            ("rho2", self.rho2 > 0, "must be positive"),
            ("mu1", self.mu1 >= 0, "must be non-negative"),
            ("mu2", self.mu2 >= 0, "must be non-negative"),
            ("d", 0 <= self.d <= 0.1, "must lie in [0, 0.1]"),
            ("cfl", 0 < self.cfl < 1, "must lie in (0, 1)"),
            ("delta", self.delta >= 0, "must be non-negative"),
        ]
        for key, ok, msg in checks:
            if not ok:
                raise ConfigError(f"{key}={getattr(self, key)!r} {msg}", key=key)
        if len(self.gravity) != 2:
            raise ConfigError("gravity must have two components", key="gravity")

    @property
    def drho(self) -> float:
        return self.rho1 - self.rho2


@dataclass(frozen=True)
class Primitive:
    p: np.ndarray
    u: np.ndarray
    v: np.ndarray
    psi: np.ndarray
    rho: np.ndarray
    mu: np.ndarray


@dataclass(frozen=True)
class WaveData:
    u_rho: np.ndarray
    a_s: np.ndarray
    lam: tuple = field(default=())


def _bad_index(mask):
    idx = np.flatnonzero(np.atleast_1d(mask))
    return int(idx[0]) if idx.size else None


def mixture_density(psi, params: Params):
    return params.rho2 + params.drho * np.asarray(psi, dtype=float)


def mix_properties(psi, params: Params, check: bool = True):
    """Density and viscosity of the mixture; psi is deliberately not clamped."""
    psi = np.asarray(psi, dtype=float)
    rho = params.rho1 * psi + params.rho2 * (1.0 - psi)
    mu = params.mu1 * psi + params.mu2 * (1.0 - psi)
    if check and np.any(~(rho > 0)):
        bad = _bad_index(~(rho > 0))
        raise AdmissibilityError(f"non-positive mixture density in cell {bad}", cell=bad)
    return rho, mu


def primitive_from_conserved(U, params: Params) -> Primitive:
    U = np.asarray(U, dtype=float)
    rho, mu = mix_properties(U[..., 3], params)
    return Primitive(
        p=params.beta * U[..., 0],
        u=U[..., 1] / rho,
        v=U[..., 2] / rho,
        psi=U[..., 3].copy(),
        rho=rho,
        mu=mu,
    )


def conserved_from_primitive(p, u, v, psi, params: Params):
    rho, _ = mix_properties(psi, params)
    p, u, v, psi = np.broadcast_arrays(
        *(np.asarray(a, dtype=float) for a in (p, u, v, psi))
    )
    return np.stack([p / params.beta, rho * u, rho * v, psi], axis=-1)


def _check_normal(n):
    n = np.asarray(n, dtype=float)
    mag = np.hypot(n[..., 0], n[..., 1])
    if np.any(np.abs(mag - 1.0) > 1e-12):
        raise ValueError("rotation requires a unit normal")
    return n


def rotate(U, n):
    """Express momentum in the (normal, tangential) frame of ``n``."""
    U = np.asarray(U, dtype=float)
    n = _check_normal(n)
    nx, ny = n[..., 0], n[..., 1]
    out = np.array(U, copy=True)
    out[..., 1] = nx * U[..., 1] + ny * U[..., 2]
    out[..., 2] = -ny * U[..., 1] + nx * U[..., 2]
    return out


def unrotate(U_hat, n):
    U_hat = np.asarray(U_hat, dtype=float)
    n = _check_normal(n)
    nx, ny = n[..., 0], n[..., 1]
    out = np.array(U_hat, copy=True)
    out[..., 1] = nx * U_hat[..., 1] - ny * U_hat[..., 2]
    out[..., 2] = ny * U_hat[..., 1] + nx * U_hat[..., 2]
    return out


def rotation_matrix(n):
    nx, ny = n
    return np.array(
        [[1, 0, 0, 0], [0, nx, ny, 0], [0, -ny, nx, 0], [0, 0, 0, 1]], dtype=float
    )


def flux_x(U, params: Params):
    """Convective flux F_c (x direction, or face-normal in a rotated frame)."""
    U = np.asarray(U, dtype=float)
    rho = mixture_density(U[..., 3], params)
    u = U[..., 1] / rho
    p = params.beta * U[..., 0]
    return np.stack([U[..., 1], U[..., 1] * u + p, U[..., 2] * u, u * U[..., 3]], axis=-1)


def flux_y(U, params: Params):
    U = np.asarray(U, dtype=float)
    rho = mixture_density(U[..., 3], params)
    v = U[..., 2] / rho
    p = params.beta * U[..., 0]
    return np.stack([U[..., 2], U[..., 1] * v, U[..., 2] * v + p, v * U[..., 3]], axis=-1)


def nc_matrix_x(U, kappa, params: Params):
    """Coefficient matrix B_x of the non-conservative products."""
    U = np.asarray(U, dtype=float)
    rho = mixture_density(U[..., 3], params)
    u = U[..., 1] / rho
    B = np.zeros(U.shape[:-1] + (4, 4))
    B[..., 0, 0] = u
    B[..., 0, 3] = -params.drho * u
    B[..., 1, 3] = -params.sigma * np.asarray(kappa, dtype=float)
    return B


def nc_matrix_y(U, kappa, params: Params):
    U = np.asarray(U, dtype=float)
    rho = mixture_density(U[..., 3], params)
    v = U[..., 2] / rho
    B = np.zeros(U.shape[:-1] + (4, 4))
    B[..., 0, 0] = v
    B[..., 0, 3] = -params.drho * v
    B[..., 2, 3] = -params.sigma * np.asarray(kappa, dtype=float)
    return B


def eigen_data(U_hat, kappa, params: Params, check: bool = True) -> WaveData:
    """Modified advection speed, system sound speed and the four eigenvalues."""
    U_hat = np.asarray(U_hat, dtype=float)
    psi = U_hat[..., 3]
    rho = mixture_density(psi, params)
    if check and np.any(~(rho > 0)):
        bad = _bad_index(~(rho > 0))
        raise AdmissibilityError(f"non-positive mixture density at index {bad}", cell=bad)
    u = U_hat[..., 1] / rho
    u_rho = (1.0 + params.rho2 / (2.0 * rho)) * u
    radicand = (u_rho - u) ** 2 + params.beta - params.sigma * kappa * psi / rho
    if np.any(~(radicand > 0)):
        bad = _bad_index(~(radicand > 0))
        raise HyperbolicityError(
            f"loss of hyperbolicity at index {bad}: beta={params.beta} does not "
            "dominate sigma*kappa*psi/rho; increase beta",
            cell=bad,
        )
    a_s = np.sqrt(radicand)
    return WaveData(u_rho=u_rho, a_s=a_s, lam=(u_rho - a_s, u, u, u_rho + a_s))


def quasilinear_matrix(U_hat, kappa, params: Params):
    """A = dF_c/dU + B_x in the face frame (test oracle for the eigenstructure)."""
    U_hat = np.asarray(U_hat, dtype=float)
    psi = U_hat[..., 3]
    rho = mixture_density(psi, params)
    u = U_hat[..., 1] / rho
    v = U_hat[..., 2] / rho
    dr = params.drho
    sk = params.sigma * np.asarray(kappa, dtype=float)
    A = np.zeros(U_hat.shape[:-1] + (4, 4))
    A[..., 0, 0] = u
    A[..., 0, 1] = 1.0
    A[..., 0, 3] = -dr * u
    A[..., 1, 0] = params.beta
    A[..., 1, 1] = 2 * u
    A[..., 1, 3] = -dr * u**2 - sk
    A[..., 2, 1] = v
    A[..., 2, 2] = u
    A[..., 2, 3] = -dr * u * v
    A[..., 3, 1] = psi / rho
    A[..., 3, 3] = params.rho2 * u / rho
    return A


def eigenvectors(U_hat, kappa, params: Params):
    """Analytic right eigenvectors as columns, ordered like ``eigen_data().lam``."""
    U_hat = np.asarray(U_hat, dtype=float)
    psi = U_hat[..., 3]
    rho = mixture_density(psi, params)
    u = U_hat[..., 1] / rho
    v = U_hat[..., 2] / rho
    lam1, _, _, lam4 = eigen_data(U_hat, kappa, params).lam
    R = np.zeros(U_hat.shape[:-1] + (4, 4))
    R[..., 0, 0] = 1.0
    R[..., 1, 0] = lam1 - params.rho2 * u / rho
    R[..., 2, 0] = v
    R[..., 3, 0] = psi / rho
    R[..., 0, 1] = params.sigma * np.asarray(kappa, dtype=float) / params.beta
    R[..., 1, 1] = params.drho * u
    R[..., 3, 1] = 1.0
    R[..., 2, 2] = 1.0
    R[..., 0, 3] = 1.0
    R[..., 1, 3] = lam4 - params.rho2 * u / rho
    R[..., 2, 3] = v
    R[..., 3, 3] = psi / rho
    return R

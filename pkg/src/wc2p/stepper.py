"""Residual assembly and SSP-RK2 time marching.

Every flux face is visited once.  The left cell receives
``T^-1 (F_c(U_L) + D^-) |f|`` and the right cell ``-T^-1 (F_c(U_R) - D^+) |f|``,
which is the per-cell sum over von Neumann neighbours written from the
right cell's point of view (its normal is reversed).
"""

from __future__ import annotations

import dataclasses
import logging
import time as _time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from . import _kernels, hllc
from .errors import (AdmissibilityError, ConfigError, HyperbolicityError, SolverError,
                     WaveCollapseError, WC2PError)
from .mesh import BoundaryTag, Mesh, PERIODIC, SLIP_WALL, SYMMETRY
from .model import (Params, eigen_data, flux_x, mix_properties, mixture_density, rotate,
                    unrotate)
from .spatial import (CurvatureField, GradientField, _face_offsets, curvature, extend_scalar,
                      extend_vector,
                      face_average, gradient_operator, interface_width, limit_gradients,
                      reconstruct_face_states, volume_noncons_term)
from .terms import (diamond_operator, gravity_source, regularization_face_flux, velocity_scale,
                    viscous_face_flux)

log = logging.getLogger(__name__)

PATH_CONSERVATIVE = "path_conservative"
CSF_SOURCE = "csf_source"


@dataclass(frozen=True)
class Scheme:
    """Solver-mode toggles."""

    order: int = 1
    surface_tension: str = PATH_CONSERVATIVE
    curvature_override: float | None = None
    regularization: bool = True

    def __post_init__(self):
        if self.order not in (1, 2):
            raise ConfigError(f"order must be 1 or 2, got {self.order}", key="order")
        if self.surface_tension not in (PATH_CONSERVATIVE, CSF_SOURCE):
            raise ConfigError(f"unknown surface tension mode {self.surface_tension!r}",
                              key="surface_tension")


@dataclass
class FieldSnapshot:
    U: np.ndarray
    t: float = 0.0
    step: int = 0
    curvature: CurvatureField | None = None
    gradients: GradientField | None = None
    cache_step: int = -1
    counters: dict = field(default_factory=lambda: {"fallbacks": 0, "degenerate_contacts": 0})

    def copy(self):
        return dataclasses.replace(self, U=self.U.copy(), counters=dict(self.counters))


# ------------------------------------------------------------------ ghosts
def reflect(U, normal):
    """Mirror the momentum of ``U`` across a wall with unit ``normal``."""
    U = np.array(U, dtype=float, copy=True)
    n = np.asarray(normal, dtype=float)
    mn = U[..., 1] * n[..., 0] + U[..., 2] * n[..., 1]
    U[..., 1] -= 2 * mn * n[..., 0]
    U[..., 2] -= 2 * mn * n[..., 1]
    return U


def ghost_state(tag: BoundaryTag | str, interior, normal, partner=None):
    """Ghost state behind a boundary face."""
    kind = tag.kind if isinstance(tag, BoundaryTag) else tag
    if kind in (SLIP_WALL, SYMMETRY):
        return reflect(interior, normal)
    if kind == PERIODIC:
        if partner is None:
            raise ConfigError("periodic ghost needs the partner cell state", key="boundary")
        return np.array(partner, dtype=float, copy=True)
    raise ConfigError(f"unknown boundary kind {kind!r}", key="boundary")


def extend_state(U, mesh: Mesh):
    """``[cells | wall ghosts]`` conserved array."""
    lay = mesh.layout
    inner = U[mesh.face_left[lay.ghost_face]]
    return np.concatenate([U, reflect(inner, lay.ghost_normal)])


def _accumulators(mesh: Mesh):
    cache = mesh.__dict__.setdefault("_ops", {})
    if "accum" not in cache:
        lay = mesh.layout
        nf = len(lay.flux_face)
        n = mesh.n_cells
        AL = sp.csr_matrix((np.ones(nf), (lay.left, np.arange(nf))), shape=(n, nf))
        inner = np.flatnonzero(~lay.is_ghost)
        AR = sp.csr_matrix((np.ones(len(inner)), (lay.right[inner], inner)), shape=(n, nf))
        cache["accum"] = (AL, AR)
    return cache["accum"]


# ---------------------------------------------------------------- time step
def convective_length(mesh: Mesh):
    """2*area/perimeter per cell (h/2 on squares).

    With sqrt(area) the unsplit first-order update is outside the RK2
    stability region at CFL 0.9 in two dimensions.
    """
    cache = mesh.__dict__.setdefault("_ops", {})
    if "h_conv" not in cache:
        per = np.zeros(mesh.n_cells)
        np.add.at(per, mesh.face_left, mesh.face_length)
        inner = mesh.face_right >= 0
        np.add.at(per, mesh.face_right[inner], mesh.face_length[inner])
        cache["h_conv"] = 2.0 * mesh.areas / per
    return cache["h_conv"]


def compute_dt(U, mesh: Mesh, params: Params, kappa=None) -> float:
    """CFL-limited global time step from the four per-cell bounds."""
    U = np.asarray(U, dtype=float)
    rho, mu = mix_properties(U[:, 3], params)
    h = mesh.cell_h
    h_conv = convective_length(mesh)
    speed = np.hypot(U[:, 1], U[:, 2]) / rho
    probe = U.copy()
    probe[:, 1] = speed * rho
    probe[:, 2] = 0.0
    k = np.zeros(len(U)) if kappa is None else np.broadcast_to(kappa, (len(U),))
    lam = eigen_data(probe, k, params).lam
    wave = np.maximum(np.abs(lam[0]), np.abs(lam[3]))
    with np.errstate(divide="ignore"):
        dt = h_conv / wave
    if params.mu1 > 0 or params.mu2 > 0:
        with np.errstate(divide="ignore"):
            dt = np.minimum(dt, np.where(mu > 0, rho * h**2 / (4 * mu), np.inf))
    g = float(np.hypot(*params.gravity))
    with np.errstate(over="ignore"):
        if g > 0:
            dt = np.minimum(dt, np.sqrt(h / g))
        if params.sigma > 0:
            dt = np.minimum(dt, np.sqrt((params.rho1 + params.rho2) * h**3
                                        / (4 * np.pi * params.sigma)))
    out = params.cfl * float(np.min(dt))
    if not np.isfinite(out) or out <= 0:
        raise SolverError(f"non-finite time step {out}")
    return out


# ----------------------------------------------------------------- residual
@dataclass
class StageInfo:
    curvature: CurvatureField
    gradients: GradientField | None
    fallbacks: int
    degenerate: int
    gamma: float


def _check_admissible(U, params, t=None):
    rho = mixture_density(U[:, 3], params)
    bad = ~(rho > 0) | ~np.all(np.isfinite(U), axis=1)
    if np.any(bad):
        c = int(np.flatnonzero(bad)[0])
        raise AdmissibilityError(f"inadmissible state in cell {c}"
                                 + (f" at t={t:.6g}" if t is not None else ""), cell=c, time=t)


def stage_curvature(U, mesh: Mesh, params: Params, scheme: Scheme, eps: float) -> CurvatureField:
    lay = mesh.layout
    need_grad = scheme.surface_tension == CSF_SOURCE and params.sigma != 0
    if scheme.curvature_override is None:
        return curvature(U[:, 3], mesh, params, eps=eps)
    k0 = float(scheme.curvature_override)
    n = mesh.n_cells
    g = (gradient_operator(mesh, "moore", ghosts=True)(extend_scalar(U[:, 3], mesh))
         if need_grad else np.zeros((n, 2)))
    return CurvatureField(normal=np.zeros((n, 2)), kappa=np.full(n, k0),
                          kappa_face=np.full(len(lay.flux_face), k0), grad_psi=g)


ENGINES = ("numba", "numpy")
ENGINE = "numba" if _kernels.AVAILABLE else "numpy"


def _attribute(exc, lay, t):
    idx = getattr(exc, "face", None)
    if idx is None:
        idx = getattr(exc, "cell", None)
    fid = int(lay.flux_face[idx]) if idx is not None else None
    exc.face = fid
    exc.args = (f"{exc.args[0]} (mesh face {fid}"
                + (f", t={t:.6g})" if t is not None else ")"),)
    return exc


def _faces_numpy(U, U_ext, mesh, params, hp, scheme, curv, t):
    lay = mesh.layout
    grads = None
    if scheme.order == 2:
        op = gradient_operator(mesh, "moore", ghosts=True)
        raw = np.stack([op.Gx @ U_ext, op.Gy @ U_ext], axis=-1)
        grads = limit_gradients(U, raw, mesh, values_ext=U_ext)
        UL, UR, nfb = reconstruct_face_states(U, U_ext, grads.grad, mesh, 2, params)
    else:
        UL, UR, nfb = reconstruct_face_states(U, U_ext, None, mesh, 1, params)
    g = lay.is_ghost
    UR[g] = reflect(UL[g], lay.normal[g])
    nrm = lay.normal
    UhL = rotate(UL, nrm)
    UhR = rotate(UR, nrm)
    try:
        pair = hllc.split_fluctuations(UhL, UhR, curv.kappa_face, hp)
    except (AdmissibilityError, HyperbolicityError, WaveCollapseError) as exc:
        raise _attribute(exc, lay, t)
    length = lay.length[:, None]
    fl = unrotate(flux_x(UhL, hp) + pair.d_minus, nrm) * length
    fr = unrotate(flux_x(UhR, hp) - pair.d_plus, nrm) * length
    AL, AR = _accumulators(mesh)
    R = AL @ fl - AR @ fr
    return R, UL, UR, grads, nfb, pair.star.n_degenerate


def _faces_numba(U, U_ext, mesh, params, hp, scheme, curv, t):
    lay = mesh.layout
    nf = len(lay.flux_face)
    grads = None
    if scheme.order == 2:
        op = gradient_operator(mesh, "moore", ghosts=True)
        raw = np.empty(U.shape + (2,))
        raw[..., 0] = op.Gx @ U_ext
        raw[..., 1] = op.Gy @ U_ext
        phi = np.empty_like(U)
        lim = np.empty_like(raw)
        _kernels.limit(U, U_ext, raw, lay.neighbors, _face_offsets(mesh), phi, lim)
        grads = GradientField(lim, phi, raw)
        UL = np.empty((nf, 4))
        UR = np.empty((nf, 4))
        nfb = _kernels.reconstruct(U, U_ext, lim, lay.left, lay.right, lay.mid,
                                   mesh.centroids, lay.right_center, lay.is_ghost,
                                   params.rho1, params.rho2, UL, UR)
    else:
        UL = U[lay.left]
        UR = U_ext[lay.right]
        nfb = 0
    R = np.zeros_like(U)
    fl = np.empty((nf, 4))
    fr = np.empty((nf, 4))
    status, _, ndeg = _kernels.face_fluxes(
        UL, UR, lay.normal, lay.length, lay.is_ghost, np.ascontiguousarray(curv.kappa_face),
        hp.beta, hp.sigma, hp.rho1, hp.rho2, lay.left, lay.right, mesh.n_cells, R, fl, fr)
    if status != _kernels.OK:
        # the array path raises the typed error with full attribution
        return _faces_numpy(U, U_ext, mesh, params, hp, scheme, curv, t)
    return R, UL, UR, grads, nfb, ndeg


def assemble_residual(U, mesh: Mesh, params: Params, scheme: Scheme = Scheme(),
                      eps: float | None = None, t: float | None = None,
                      engine: str | None = None):
    """Semi-discrete residual R_i (so that area_i dU_i/dt = -R_i) and stage info.

    ``engine`` selects the compiled face loops ("numba") or the array
    reference ("numpy"); both evaluate the same expressions.
    """
    U = np.ascontiguousarray(U, dtype=float)
    _check_admissible(U, params, t)
    engine = engine or ENGINE
    if engine not in ENGINES:
        raise ConfigError(f"unknown engine {engine!r}", key="engine")
    lay = mesh.layout
    if eps is None:
        eps = interface_width(mesh.h, params)
    AL, AR = _accumulators(mesh)
    csf = scheme.surface_tension == CSF_SOURCE
    hp = dataclasses.replace(params, sigma=0.0) if csf else params

    U_ext = extend_state(U, mesh)
    curv = stage_curvature(U, mesh, params, scheme, eps)
    faces = _faces_numba if engine == "numba" else _faces_numpy
    R, UL, UR, grads, nfb, ndeg = faces(U, U_ext, mesh, params, hp, scheme, curv, t)

    fast = engine == "numba"
    if scheme.order == 2:
        if fast:
            _kernels.volume_term(U, np.ascontiguousarray(grads.grad), curv.kappa,
                                 mesh.areas, hp.sigma, hp.rho1, hp.rho2, R)
        else:
            R += volume_noncons_term(U, grads.grad, curv.kappa, mesh.areas, hp)
    if csf and params.sigma != 0:
        R[:, 1:3] -= (params.sigma * curv.kappa * mesh.areas)[:, None] * curv.grad_psi

    if params.mu1 > 0 or params.mu2 > 0:
        psi_face = 0.5 * (UL[:, 3] + UR[:, 3])
        rho = mixture_density(U[:, 3], params)
        vel_ext = extend_vector(U[:, 1:3] / rho[:, None], mesh)
        vf = viscous_face_flux(vel_ext, psi_face, mesh, params)
        R -= AL @ vf - AR @ vf
    if params.gravity != (0.0, 0.0):
        R -= gravity_source(U, mesh.areas, params)
    gamma = 0.0
    if scheme.regularization:
        gamma = (_kernels.max_speed(U, params.rho1, params.rho2) if fast
                 else velocity_scale(U, params))
        if gamma > 0 and fast:
            D = diamond_operator(mesh)
            _kernels.regularization(D.Dx.indptr, D.Dx.indices, D.Dx.data, D.Dy.indptr,
                                    D.Dy.indices, D.Dy.data, U_ext[:, 3], UL, UR, gamma, eps,
                                    params.delta, lay.normal, lay.length, lay.is_ghost,
                                    lay.left, lay.right, R, np.empty(len(lay.flux_face)))
        elif gamma > 0:
            psi_face = 0.5 * (UL[:, 3] + UR[:, 3])
            rf = regularization_face_flux(U_ext[:, 3], psi_face, gamma, eps, mesh, params)
            R[:, 3] -= AL @ rf - AR @ rf
    info = StageInfo(curvature=curv, gradients=grads, fallbacks=nfb,
                     degenerate=ndeg, gamma=gamma)
    return R, info


# ---------------------------------------------------------------- RK2 step
ResidualFn = Callable[[np.ndarray, float], np.ndarray]


def ssprk2_step(snapshot: FieldSnapshot, mesh: Mesh, params: Params, scheme: Scheme = Scheme(),
                dt: float | None = None, eps: float | None = None,
                residual: ResidualFn | None = None) -> FieldSnapshot:
    """Two-stage SSP Runge-Kutta update.

    ``residual(U, t)`` may replace the spatial operator (used for ODE checks).
    """
    U0 = snapshot.U
    t0 = snapshot.t
    counters = dict(snapshot.counters)
    last = {}

    def R(U, t):
        if residual is not None:
            return residual(U, t)
        r, info = assemble_residual(U, mesh, params, scheme, eps=eps, t=t)
        counters["fallbacks"] = counters.get("fallbacks", 0) + info.fallbacks
        counters["degenerate_contacts"] = counters.get("degenerate_contacts", 0) + info.degenerate
        last["info"] = info
        return r

    if dt is None:
        k = snapshot.curvature.kappa if snapshot.curvature is not None else None
        dt = compute_dt(U0, mesh, params, k)
    area = mesh.areas[:, None] if residual is None else 1.0
    check = params is not None
    U1 = U0 - dt / area * R(U0, t0)
    if check:
        _check_admissible(U1, params, t0 + dt)
    U2 = 0.5 * U0 + 0.5 * U1 - 0.5 * dt / area * R(U1, t0 + dt)
    if check:
        _check_admissible(U2, params, t0 + dt)
    info = last.get("info")
    return FieldSnapshot(
        U=U2, t=t0 + dt, step=snapshot.step + 1,
        curvature=info.curvature if info else None,
        gradients=info.gradients if info else None,
        cache_step=snapshot.step + 1 if info else -1,
        counters=counters,
    )


# ----------------------------------------------------------------- driver
@dataclass
class TimeSeries:
    name: str
    t: list = field(default_factory=list)
    values: list = field(default_factory=list)

    def append(self, t, v):
        if self.t and not t > self.t[-1]:
            raise ValueError("time series samples must be strictly increasing in time")
        self.t.append(float(t))
        self.values.append(float(v))

    @property
    def times(self):
        return np.asarray(self.t)

    @property
    def data(self):
        return np.asarray(self.values)


@dataclass
class RunResult:
    final: FieldSnapshot
    snapshots: list
    series: dict
    diagnostics: dict


def run_simulation(config, mesh: Mesh, snapshot_every: float | None = None,
                   on_snapshot: Callable | None = None, max_steps: int | None = None) -> RunResult:
    """March a configured case to ``config.t_end`` recording its probes."""
    from .cases import init_case, make_probes

    params = config.params
    scheme = config.scheme
    eps = interface_width(mesh.h, params)
    snap = init_case(config, mesh)
    probes = make_probes(config, mesh)
    series = {name: TimeSeries(name) for name in probes}

    def record(s):
        for name, fn in probes.items():
            series[name].append(s.t, fn(s))

    record(snap)
    snapshots = [snap.copy()]
    next_out = snapshot_every if snapshot_every else None
    dts = []
    wall0 = _time.perf_counter()
    t_end = float(config.t_end)
    try:
        while snap.t < t_end * (1 - 1e-14):
            k = snap.curvature.kappa if snap.curvature is not None else (
                stage_curvature(snap.U, mesh, params, scheme, eps).kappa)
            dt = compute_dt(snap.U, mesh, params, k)
            dt = min(dt, t_end - snap.t)
            snap = ssprk2_step(snap, mesh, params, scheme, dt=dt, eps=eps)
            if snap.t >= t_end * (1 - 1e-14):
                snap.t = t_end
            dts.append(dt)
            record(snap)
            if next_out is not None and snap.t >= next_out - 1e-12:
                snapshots.append(snap.copy())
                if on_snapshot:
                    on_snapshot(snap)
                next_out += snapshot_every
            if max_steps is not None and snap.step >= max_steps:
                break
    except WC2PError as exc:
        exc.partial = RunResult(snap, snapshots, series, _diag(snap, dts, wall0))
        raise
    if snapshots[-1].step != snap.step:
        snapshots.append(snap.copy())
    return RunResult(snap, snapshots, series, _diag(snap, dts, wall0))


def _diag(snap, dts, wall0):
    return {
        "steps": snap.step,
        "t": snap.t,
        "dt_min": float(min(dts)) if dts else None,
        "dt_max": float(max(dts)) if dts else None,
        "wall_seconds": _time.perf_counter() - wall0,
        **snap.counters,
    }

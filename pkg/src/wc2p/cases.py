"""Benchmark set-ups, analytical references, probes and error metrics.

Four validation problems are provided as presets: a static drop, linear
sloshing in a tank, a damped capillary wave and the Rayleigh-Taylor
instability.  Oracles here are pure functions of the configuration.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import wofz

from .errors import ConfigError, FitError, MetricError, OracleError, ProbeError
from .mesh import PERIODIC, SLIP_WALL, SYMMETRY, Mesh, build_cartesian, build_triangulated
from .model import Params, conserved_from_primitive, mix_properties
from .spatial import interface_width
from .stepper import FieldSnapshot, Scheme

log = logging.getLogger(__name__)

STATIC_DROP = "static_drop"
LINEAR_SLOSHING = "linear_sloshing"
CAPILLARY_WAVE = "capillary_wave"
RAYLEIGH_TAYLOR = "rayleigh_taylor"
CUSTOM = "custom"
CASE_KINDS = (STATIC_DROP, LINEAR_SLOSHING, CAPILLARY_WAVE, RAYLEIGH_TAYLOR, CUSTOM)
PRESSURE_INITS = ("zero", "hydrostatic", "exact_drop")


@dataclass(frozen=True)
class MeshSpec:
    """How to obtain the mesh of a case.

    kind is ``cartesian`` (nx, ny), ``triangles`` (size, optional
    ``refine_size``/``refine_band`` around the interface) or ``file`` (path).
    """

    kind: str = "cartesian"
    nx: int = 32
    ny: int = 32
    size: float = 0.1
    refine_size: float | None = None
    refine_band: float = 0.0
    path: str | None = None


@dataclass(frozen=True)
class CaseConfig:
    kind: str
    params: Params
    t_end: float
    scheme: Scheme = Scheme()
    mesh: MeshSpec = MeshSpec()
    L: float = 1.0
    H: float | None = None
    h_fill: float | None = None
    R: float | None = None
    A0: float | None = None
    k: float | None = None
    phi_s: float | None = None
    pressure_init: str = "zero"
    probe_x: float | None = None

    def __post_init__(self):
        if self.kind not in CASE_KINDS:
            raise ConfigError(f"unknown case kind {self.kind!r}", key="kind")
        if self.pressure_init not in PRESSURE_INITS:
            raise ConfigError(f"unknown pressure_init {self.pressure_init!r}", key="pressure_init")
        if not (self.t_end >= 0):
            raise ConfigError("t_end must be non-negative", key="t_end")
        if not (self.L > 0):
            raise ConfigError("L must be positive", key="L")
        required = {
            STATIC_DROP: ("R",),
            LINEAR_SLOSHING: ("H", "h_fill"),
            CAPILLARY_WAVE: ("A0",),
            RAYLEIGH_TAYLOR: ("k", "A0"),
        }.get(self.kind, ())
        for key in required:
            if getattr(self, key) is None:
                raise ConfigError(f"case {self.kind} requires {key}", key=key)
        if self.kind == STATIC_DROP and not (0 < self.R < self.L / 2):
            raise ConfigError("drop radius must fit inside the domain", key="R")
        if self.kind == LINEAR_SLOSHING and not (0 < self.h_fill < self.H):
            raise ConfigError("fill height must lie inside the tank", key="h_fill")
        if self.kind == CAPILLARY_WAVE and not (0 <= abs(self.A0) < self.L / 2):
            raise ConfigError("wave amplitude must keep the interface inside the domain", key="A0")

    @property
    def extent(self):
        if self.kind == LINEAR_SLOSHING:
            return (self.L, self.H)
        if self.kind == RAYLEIGH_TAYLOR:
            return (self.L / 2, 3 * self.L)
        return (self.L, self.H if self.H is not None else self.L)

    @property
    def boundaries(self):
        if self.kind == CAPILLARY_WAVE:
            return {"left": PERIODIC, "right": PERIODIC, "bottom": SLIP_WALL, "top": SLIP_WALL}
        if self.kind == RAYLEIGH_TAYLOR:
            return {"left": SLIP_WALL, "right": SYMMETRY, "bottom": SLIP_WALL, "top": SLIP_WALL}
        return {s: SLIP_WALL for s in ("left", "right", "bottom", "top")}

    def replace(self, **kw) -> "CaseConfig":
        return dataclasses.replace(self, **kw)

    def with_mesh(self, **kw) -> "CaseConfig":
        return dataclasses.replace(self, mesh=dataclasses.replace(self.mesh, **kw))

    def with_scheme(self, **kw) -> "CaseConfig":
        return dataclasses.replace(self, scheme=dataclasses.replace(self.scheme, **kw))


# ------------------------------------------------------------------ presets
def static_drop(n: int = 32, **kw) -> CaseConfig:
    params = Params(beta=1e4, sigma=73.0, rho1=1.0, rho2=1.0)
    base = dict(kind=STATIC_DROP, params=params, t_end=5.0, L=8.0, R=2.0,
                scheme=Scheme(order=1, regularization=False),
                mesh=MeshSpec("cartesian", n, n))
    base.update(kw)
    return CaseConfig(**base)


def linear_sloshing(nx: int = 32, **kw) -> CaseConfig:
    params = Params(beta=1e3, rho1=1000.0, rho2=1.0, gravity=(-9.81e-2, -9.81))
    ny = int(round(nx * 2.25))
    base = dict(kind=LINEAR_SLOSHING, params=params, t_end=4.0, L=1.0, H=2.25, h_fill=1.0,
                scheme=Scheme(order=2), mesh=MeshSpec("cartesian", nx, ny),
                pressure_init="hydrostatic", probe_x=0.25)
    base.update(kw)
    return CaseConfig(**base)


def capillary_wave(n: int = 32, mode: str = "path_conservative", **kw) -> CaseConfig:
    params = Params(beta=50.0, sigma=1.0, rho1=18.3, rho2=18.3, mu1=7.8e-2, mu2=7.8e-2)
    base = dict(kind=CAPILLARY_WAVE, params=params, t_end=9.0, L=1.0, A0=0.01,
                scheme=Scheme(order=2, surface_tension=mode),
                mesh=MeshSpec("cartesian", n, n), probe_x=0.5)
    base.update(kw)
    return CaseConfig(**base)


def rti_sigma(phi_s: float, k: float, g: float, rho1: float, rho2: float) -> float:
    """Surface tension giving the normalized parameter phi_s."""
    A = (rho1 - rho2) / (rho1 + rho2)
    return phi_s * A * abs(g) * (rho1 + rho2) / k**2


def rayleigh_taylor(nx: int = 64, phi_s: float = 0.0, **kw) -> CaseConfig:
    k = 5.0 / 3.0
    rho1, rho2, g = 1.2, 0.3, -1.0
    params = Params(beta=1e3, rho1=rho1, rho2=rho2, gravity=(0.0, g),
                    sigma=rti_sigma(phi_s, k, g, rho1, rho2))
    L = 2 * np.pi / k
    base = dict(kind=RAYLEIGH_TAYLOR, params=params, t_end=10.0, L=L, k=k, A0=0.035,
                phi_s=phi_s, scheme=Scheme(order=2), mesh=MeshSpec("cartesian", nx, 6 * nx),
                pressure_init="hydrostatic", probe_x=L / 2)
    base.update(kw)
    return CaseConfig(**base)


PRESETS = {
    STATIC_DROP: static_drop,
    LINEAR_SLOSHING: linear_sloshing,
    CAPILLARY_WAVE: capillary_wave,
    RAYLEIGH_TAYLOR: rayleigh_taylor,
}


# -------------------------------------------------------------------- mesh
def interface_level(config: CaseConfig) -> float | None:
    """Mean height of a horizontal interface, if the case has one."""
    if config.kind == LINEAR_SLOSHING:
        return config.h_fill
    if config.kind == CAPILLARY_WAVE:
        return config.L / 2
    if config.kind == RAYLEIGH_TAYLOR:
        return 2 * config.L
    return None


def build_mesh(config: CaseConfig) -> Mesh:
    spec = config.mesh
    if spec.kind == "cartesian":
        return build_cartesian(spec.nx, spec.ny, config.extent, (0.0, 0.0), config.boundaries)
    if spec.kind == "triangles":
        size = spec.size
        level = interface_level(config)
        if spec.refine_size is not None and level is not None:
            fine, coarse, band = spec.refine_size, spec.size, spec.refine_band

            def size(y, fine=fine, coarse=coarse, band=band, level=level):
                d = max(abs(y - level) - band, 0.0)
                return min(coarse, fine + 0.35 * d)

        return build_triangulated(config.extent, (0.0, 0.0), size, config.boundaries)
    if spec.kind == "file":
        from .mesh import import_mesh

        if not spec.path:
            raise ConfigError("mesh kind 'file' needs a path", key="path")
        with open(spec.path, encoding="utf-8") as fh:
            return import_mesh(fh.read())
    raise ConfigError(f"unknown mesh kind {spec.kind!r}", key="mesh")


# ---------------------------------------------------------- initialization
def _cosine_distance(x, y, y0, amp, k):
    """Signed distance to y = y0 + amp*cos(k x), positive above the curve."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if amp == 0:
        return y - y0
    s = x.copy()
    for _ in range(50):
        f = y0 + amp * np.cos(k * s)
        fp = -amp * k * np.sin(k * s)
        fpp = -amp * k * k * np.cos(k * s)
        g = (s - x) + (f - y) * fp
        gp = 1 + fp * fp + (f - y) * fpp
        step = g / gp
        s = s - step
        if np.max(np.abs(step)) < 1e-15 * max(1.0, float(np.max(np.abs(x)))):
            break
    f = y0 + amp * np.cos(k * s)
    d = np.hypot(s - x, f - y)
    return np.where(y >= y0 + amp * np.cos(k * x), d, -d)


def signed_distance(config: CaseConfig, points):
    """Signed distance to the initial interface, positive inside fluid 1."""
    pts = np.asarray(points, dtype=float)
    x, y = pts[..., 0], pts[..., 1]
    if config.kind == STATIC_DROP:
        c = 0.5 * config.L
        return config.R - np.hypot(x - c, y - c)
    if config.kind == LINEAR_SLOSHING:
        return config.h_fill - y
    if config.kind == CAPILLARY_WAVE:
        # fluid 1 below y = L/2 - A0 cos(2 pi x / L)
        return -_cosine_distance(x, y, config.L / 2, -config.A0, 2 * np.pi / config.L)
    if config.kind == RAYLEIGH_TAYLOR:
        # heavy fluid 1 above y = 2L + A0 cos(k x)
        return _cosine_distance(x, y, 2 * config.L, config.A0, config.k)
    raise ConfigError("custom cases need an explicit initial field", key="kind")


def tanh_profile(phi, eps: float):
    return 0.5 * (np.tanh(np.asarray(phi, dtype=float) / (2 * eps)) + 1.0)


def _log_cosh(z):
    z = np.abs(z)
    return z + np.log1p(np.exp(-2 * z)) - np.log(2.0)


def hydrostatic_pressure(psi, mesh: Mesh, params: Params, config: CaseConfig):
    """Pressure with p=0 on the top wall and dp/dy = rho g_y.

    Structured meshes integrate the cell-average density column by column;
    other meshes integrate the analytic tanh profile of a flat interface.
    """
    gy = params.gravity[1]
    top = mesh.bounding_box[1][1]
    rho, _ = mix_properties(psi, params)
    if mesh.structured is not None:
        nx, ny = mesh.structured["nx"], mesh.structured["ny"]
        dy = mesh.structured["extent"][1] / ny
        r = rho.reshape(ny, nx)
        p = np.zeros_like(r)
        p[-1] = -gy * r[-1] * dy / 2
        for j in range(ny - 2, -1, -1):
            p[j] = p[j + 1] - gy * 0.5 * (r[j] + r[j + 1]) * dy
        return p.ravel()
    level = interface_level(config)
    if level is None:
        raise ConfigError("hydrostatic initialization needs a horizontal interface",
                          key="pressure_init")
    eps = interface_width(mesh.h, params)
    y = mesh.centroids[:, 1]
    # integral of psi from y to top for psi = (tanh(s*(level - y)/2eps) + 1)/2
    sgn = 1.0 if signed_distance(config, np.array([[0.0, level - 1.0]]))[0] > 0 else -1.0
    int_tanh = -sgn * 2 * eps * (_log_cosh((level - top) / (2 * eps))
                                 - _log_cosh((level - y) / (2 * eps)))
    int_psi = 0.5 * (top - y) + 0.5 * int_tanh
    int_rho = params.rho2 * (top - y) + params.drho * int_psi
    return -gy * int_rho


def init_case(config: CaseConfig, mesh: Mesh) -> FieldSnapshot:
    """Initial state: tanh phase field, fluid at rest, configured pressure."""
    params = config.params
    eps = interface_width(mesh.h, params)
    phi = signed_distance(config, mesh.centroids)
    psi = tanh_profile(phi, eps)
    lo, hi = mesh.bounding_box
    if config.kind == STATIC_DROP:
        c = 0.5 * config.L
        if (c - config.R < lo[0] or c + config.R > hi[0]
                or c - config.R < lo[1] or c + config.R > hi[1]):
            raise ConfigError("drop lies outside the domain", key="R")
    level = interface_level(config)
    if level is not None and not (lo[1] < level < hi[1]):
        raise ConfigError("interface lies outside the domain", key="h_fill")
    if config.pressure_init == "zero":
        p = np.zeros(mesh.n_cells)
    elif config.pressure_init == "hydrostatic":
        p = hydrostatic_pressure(psi, mesh, params, config)
    else:
        kappa = (config.scheme.curvature_override if config.scheme.curvature_override is not None
                 else 1.0 / config.R)
        # discrete equilibrium of the contact: jump sigma*kappa*d(psi)
        p = params.sigma * kappa * (psi - psi.min())
    U = conserved_from_primitive(p, 0.0, 0.0, psi, params)
    return FieldSnapshot(U=U, t=0.0, step=0)


# ------------------------------------------------------------------ oracles
def exact_drop_pressure(psi, p_min, psi_min, psi_max, delta_p):
    """Diffused Young-Laplace pressure p_min + (psi-psi_min)/(psi_max-psi_min)*dp."""
    if not psi_max > psi_min:
        raise ValueError("psi_max must exceed psi_min")
    psi = np.asarray(psi, dtype=float)
    return p_min + (psi - psi_min) / (psi_max - psi_min) * delta_p


def sloshing_terms(config: CaseConfig, tol: float = 1e-12):
    """Odd wavenumbers, frequencies and amplitude factors of the sloshing series.

    Modes are kept until the amplitude factor 4/(k^2 L) drops below tol*L.
    """
    L, H, h = config.L, config.H, config.h_fill
    p = config.params
    gy = abs(p.gravity[1])
    kmax = np.sqrt(4.0 / (tol * L * L))
    nmax = int(np.ceil((kmax * L / np.pi - 1) / 2)) + 1
    k = (2 * np.arange(nmax) + 1) * np.pi / L
    amp = 4.0 / (k**2 * L)
    with np.errstate(over="ignore"):
        coth1 = 1.0 / np.tanh(k * h)
        coth2 = 1.0 / np.tanh(k * (H - h))
    omega = np.sqrt(gy * k * p.drho / (p.rho1 * coth1 + p.rho2 * coth2))
    return k, omega, amp


def sloshing_eta_exact(x, t, config: CaseConfig, tol: float = 1e-12, chunk: int = 4000):
    """Linear free-surface elevation eta(x, t) of the sloshing tank.

    The steady part L/2 - x equals minus the t=0 value of the cosine series,
    so the series is summed as amp*(cos(w t) - 1)*cos(k (x - L)).
    """
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(x < 0) or np.any(x > config.L):
        raise ValueError("x must lie in [0, L]")
    gx, gy = config.params.gravity
    ratio = gx / gy
    k, omega, amp = sloshing_terms(config, tol)
    xb, tb = np.broadcast_arrays(x, t)
    out = np.zeros(xb.shape)
    xf, tf = xb.ravel(), tb.ravel()
    acc = np.zeros(xf.shape)
    # sum from the smallest terms upward to limit round-off
    for s in range(len(k), 0, -chunk):
        sl = slice(max(0, s - chunk), s)
        # cos(w t) - 1 written without cancellation
        c = -2.0 * np.sin(0.5 * np.outer(tf, omega[sl])) ** 2
        acc += (c * np.cos(np.outer(xf - config.L, k[sl]))) @ amp[sl]
    out.ravel()[:] = ratio * acc
    return out if out.ndim else float(out)


def sloshing_eta_series(x, t, config: CaseConfig, n_terms: int):
    """Direct (un-rearranged) partial sum with ``n_terms`` modes; test oracle."""
    gx, gy = config.params.gravity
    k, omega, amp = sloshing_terms(config)
    k, omega, amp = k[:n_terms], omega[:n_terms], amp[:n_terms]
    s = np.sum(amp * np.cos(omega * t) * np.cos(k * (x - config.L)))
    return gx / gy * (config.L / 2 - x + s)


@dataclass
class CapillaryOracle:
    roots: np.ndarray
    weights: np.ndarray
    nu_k2: float
    a0: float

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise ValueError("t must be non-negative")
        st = np.sqrt(t)[..., None]
        w = wofz(1j * self.roots * st)
        val = np.sum(self.weights * w, axis=-1) * np.exp(-self.nu_k2 * t)
        out = self.a0 * val.real
        return out if out.ndim else float(out)


def capillary_oracle(a0: float, k: float, nu: float, sigma: float, rho1: float,
                     rho2: float) -> CapillaryOracle:
    """Small-amplitude initial-value solution for equal densities/viscosities."""
    if abs(rho1 - rho2) > 1e-12 * max(rho1, rho2):
        raise OracleError("capillary oracle supports equal densities only")
    w0sq = sigma * k**3 / (rho1 + rho2)
    q = k * k * nu
    sq = np.sqrt(q)
    coeffs = [1.0, -sq, -q, q * sq, w0sq]
    z = np.roots(coeffs).astype(complex)
    poly = np.poly1d(coeffs)
    dpoly = poly.deriv()
    for _ in range(5):
        z = z - poly(z) / dpoly(z)
    scale = max(abs(w0sq), q * q, 1e-300)
    if np.max(np.abs(poly(z))) > 1e-8 * scale:
        raise OracleError("dispersion polynomial roots did not converge")
    Z = np.array([np.prod([z[j] - z[i] for j in range(4) if j != i]) for i in range(4)])
    if np.min(np.abs(Z)) < 1e-12 * max(1.0, np.max(np.abs(z))) ** 3:
        raise OracleError("repeated dispersion roots; formula is singular")
    weights = z / Z * w0sq / (z**2 - q)
    return CapillaryOracle(roots=z, weights=weights, nu_k2=q, a0=a0)


def capillary_amplitude_exact(t, config: CaseConfig):
    p = config.params
    if abs(p.mu1 - p.mu2) > 1e-12 * max(p.mu1, p.mu2, 1e-300):
        raise OracleError("capillary oracle supports equal viscosities only")
    k = 2 * np.pi / config.L
    oracle = capillary_oracle(config.A0, k, p.mu1 / p.rho1, p.sigma, p.rho1, p.rho2)
    return oracle(t)


def rti_growth_theory(config: CaseConfig | None = None, *, k=None, gy=None, rho1=None,
                      rho2=None, sigma=None):
    """Linear growth rate sqrt(k|g|(A - k^2 sigma/(|g|(rho1+rho2)))) or "stable"."""
    if config is not None:
        p = config.params
        k, gy, rho1, rho2, sigma = config.k, p.gravity[1], p.rho1, p.rho2, p.sigma
    g = abs(gy)
    A = (rho1 - rho2) / (rho1 + rho2)
    rad = k * g * (A - k * k * sigma / (g * (rho1 + rho2)))
    if abs(rad) <= 1e-12 * k * g * abs(A):
        return 0.0
    if rad < 0:
        return "stable"
    return float(np.sqrt(rad))


# -------------------------------------------------------------------- probes
def _crossings(y, psi):
    y = np.asarray(y)
    f = np.asarray(psi) - 0.5
    out = []
    for a in range(len(y) - 1):
        fa, fb = f[a], f[a + 1]
        if fa == 0.0:
            out.append(y[a])
        elif fa * fb < 0:
            out.append(y[a] + (0.0 - fa) * (y[a + 1] - y[a]) / (fb - fa))
    if len(f) and f[-1] == 0.0:
        out.append(y[-1])
    return np.array(sorted(set(out)))


def probe_samples(psi, mesh: Mesh, x_probe: float):
    """(y, psi) samples along the vertical line x = x_probe."""
    psi = np.asarray(psi, dtype=float)
    if mesh.structured is not None:
        s = mesh.structured
        nx, ny = s["nx"], s["ny"]
        dx = s["extent"][0] / nx
        xc = s["origin"][0] + dx * (np.arange(nx) + 0.5)
        grid = psi.reshape(ny, nx)
        y = s["origin"][1] + s["extent"][1] / ny * (np.arange(ny) + 0.5)
        if x_probe < s["origin"][0] or x_probe > s["origin"][0] + s["extent"][0]:
            raise ProbeError(f"probe x={x_probe} outside the mesh")
        if x_probe <= xc[0]:
            return y, grid[:, 0]
        if x_probe >= xc[-1]:
            return y, grid[:, -1]
        i = int(np.searchsorted(xc, x_probe) - 1)
        w = (x_probe - xc[i]) / dx
        return y, (1 - w) * grid[:, i] + w * grid[:, i + 1]
    sel = np.flatnonzero(np.abs(mesh.centroids[:, 0] - x_probe) <= 0.5 * mesh.h)
    if sel.size < 2:
        raise ProbeError(f"no cells near the probe line x={x_probe}")
    order = np.argsort(mesh.centroids[sel, 1], kind="stable")
    sel = sel[order]
    return mesh.centroids[sel, 1], psi[sel]


def interface_elevation(psi, mesh: Mesh, x_probe: float, reference: float) -> float:
    """Height of the psi=0.5 crossing nearest ``reference`` on x = x_probe."""
    if isinstance(psi, FieldSnapshot):
        psi = psi.U[:, 3]
    y, s = probe_samples(psi, mesh, x_probe)
    c = _crossings(y, s)
    if c.size == 0:
        raise ProbeError(f"no psi=0.5 crossing on x={x_probe}")
    return float(c[np.argmin(np.abs(c - reference))])


class ElevationProbe:
    """Stateful elevation probe that follows the previous crossing.

    With ``lenient=True`` a missing crossing yields NaN instead of a
    ProbeError, for runs whose interface is expected to leave the probe line
    late in the run (a Rayleigh-Taylor spike reaching the bottom wall).
    """

    def __init__(self, mesh: Mesh, x_probe: float, initial: float, datum: float = 0.0,
                 absolute: bool = False, lenient: bool = False):
        self.mesh = mesh
        self.x = x_probe
        self.prev = initial
        self.datum = datum
        self.absolute = absolute
        self.lenient = lenient
        self.lost_at = None

    def __call__(self, snap: FieldSnapshot) -> float:
        try:
            y = interface_elevation(snap.U[:, 3], self.mesh, self.x, self.prev)
        except ProbeError:
            if not self.lenient:
                raise
            if self.lost_at is None:
                self.lost_at = snap.t
                log.warning("interface left the probe line x=%g at t=%g", self.x, snap.t)
            return float("nan")
        self.prev = y
        v = y - self.datum
        return abs(v) if self.absolute else v


def vmax(U, params: Params) -> float:
    """max_i |v_i|."""
    U = np.asarray(U, dtype=float)
    rho, _ = mix_properties(U[:, 3], params, check=False)
    return float(np.max(np.hypot(U[:, 1], U[:, 2]) / rho))


def initial_elevation(config: CaseConfig, x: float) -> float:
    if config.kind == LINEAR_SLOSHING:
        return config.h_fill
    if config.kind == CAPILLARY_WAVE:
        return config.L / 2 - config.A0 * np.cos(2 * np.pi * x / config.L)
    if config.kind == RAYLEIGH_TAYLOR:
        return 2 * config.L + config.A0 * np.cos(config.k * x)
    raise ConfigError("case has no interface probe", key="probe_x")


def make_probes(config: CaseConfig, mesh: Mesh) -> dict:
    probes = {"vmax": lambda s: vmax(s.U, config.params)}
    if config.kind in (LINEAR_SLOSHING, CAPILLARY_WAVE, RAYLEIGH_TAYLOR):
        x = config.probe_x if config.probe_x is not None else config.L / 2
        y0 = initial_elevation(config, x)
        if config.kind == LINEAR_SLOSHING:
            probes["eta"] = ElevationProbe(mesh, x, y0, datum=config.h_fill)
        elif config.kind == CAPILLARY_WAVE:
            probes["amplitude"] = ElevationProbe(mesh, x, y0, datum=config.L / 2)
        else:
            probes["amplitude"] = ElevationProbe(mesh, x, y0, datum=2 * config.L, absolute=True,
                                                 lenient=True)
    return probes


# ------------------------------------------------------------------ metrics
def pressure_l2(U, mesh: Mesh, params: Params, delta_p: float) -> float:
    """Normalized L2 pressure error against the diffused Young-Laplace profile."""
    U = np.asarray(U, dtype=float)
    p = params.beta * U[:, 0]
    psi = U[:, 3]
    exact = exact_drop_pressure(psi, p.min(), psi.min(), psi.max(), delta_p)
    return float(np.sqrt(np.sum((p - exact) ** 2 * mesh.areas)) / delta_p)


def timeseries_l2(t, values, reference) -> float:
    """sqrt(sum e_k^2 dt_k / T) over samples k >= 1."""
    t = np.asarray(t, dtype=float)
    e = np.asarray(values, dtype=float) - np.asarray(reference, dtype=float)
    if t.size < 2:
        return float(abs(e[0])) if e.size else 0.0
    dt = np.diff(t)
    T = t[-1] - t[0]
    return float(np.sqrt(np.sum(e[1:] ** 2 * dt) / T))


def error_metrics(result, config: CaseConfig, mesh: Mesh) -> dict:
    """Case-appropriate error measures of a finished run."""
    out = {}
    series = result.series
    if "vmax" in series:
        out["vmax"] = float(np.max(series["vmax"].data))
    U = result.final.U
    if config.kind == STATIC_DROP:
        kappa = (config.scheme.curvature_override if config.scheme.curvature_override is not None
                 else 1.0 / config.R)
        out["l2_p"] = pressure_l2(U, mesh, config.params, config.params.sigma * kappa)
    elif config.kind == LINEAR_SLOSHING:
        s = series["eta"]
        # long series: 1e-10 truncation keeps the oracle error below 1e-7 L
        ref = sloshing_eta_exact(np.full(len(s.t), config.probe_x), s.times, config, tol=1e-10)
        out["l2_eta"] = timeseries_l2(s.times, s.data, ref)
    elif config.kind == CAPILLARY_WAVE:
        s = series["amplitude"]
        ref = capillary_amplitude_exact(s.times, config)
        out["l2_amplitude"] = timeseries_l2(s.times, s.data, ref)
    elif config.kind == RAYLEIGH_TAYLOR:
        s = series["amplitude"]
        fit = fit_growth_rate(s.times, s.data, a0=config.A0)
        out["growth_rate"] = fit.rate
        out["fit_r2"] = fit.r2
        out["theory"] = rti_growth_theory(config)
    return out


@dataclass
class GrowthFit:
    rate: float
    intercept: float
    r2: float
    window: tuple
    n_samples: int
    t_range: tuple = field(default=(np.nan, np.nan))


def fit_growth_rate(t, amplitude, a0: float | None = None, window=None,
                    min_samples: int = 10) -> GrowthFit:
    """Least-squares slope of ln(amplitude) against t inside an amplitude window."""
    t = np.asarray(t, dtype=float)
    a = np.asarray(amplitude, dtype=float)
    if a0 is None:
        a0 = float(a[0])
    lo, hi = window if window is not None else (2 * a0, 10 * a0)
    sel = (a >= lo) & (a <= hi)
    if np.count_nonzero(sel) < min_samples:
        raise FitError(f"only {int(np.count_nonzero(sel))} samples inside window [{lo}, {hi}]")
    tt, ya = t[sel], np.log(a[sel])
    slope, icpt = np.polyfit(tt, ya, 1)
    resid = ya - (slope * tt + icpt)
    ss = np.sum((ya - ya.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss if ss > 0 else 1.0
    return GrowthFit(float(slope), float(icpt), float(r2), (lo, hi), int(sel.sum()),
                     (float(tt[0]), float(tt[-1])))


def effective_order(errors, h_values) -> float:
    """Slope of ln(error) against ln(h)."""
    e = np.asarray(errors, dtype=float)
    h = np.asarray(h_values, dtype=float)
    if e.size < 2 or e.size != h.size:
        raise MetricError("need at least two (h, error) pairs")
    if np.any(~(e > 0)) or np.any(~(h > 0)):
        raise MetricError("errors and mesh sizes must be positive")
    return float(np.polyfit(np.log(h), np.log(e), 1)[0])

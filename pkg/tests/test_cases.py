import numpy as np
import pytest
from hypothesis import given, strategies as st

from wc2p import cases
from wc2p.cases import (CaseConfig, MeshSpec, capillary_amplitude_exact, capillary_oracle,
                        effective_order, exact_drop_pressure, fit_growth_rate, init_case,
                        interface_elevation, pressure_l2, rti_growth_theory, sloshing_eta_exact,
                        sloshing_eta_series, sloshing_terms, timeseries_l2)
from wc2p.errors import ConfigError, FitError, MetricError, OracleError, ProbeError
from wc2p.mesh import build_cartesian, build_triangulated
from wc2p.model import Params
from wc2p.spatial import gradient_operator, interface_width
from wc2p.stepper import FieldSnapshot


# ---------------------------------------------------------------- configs
def test_missing_case_parameter():
    with pytest.raises(ConfigError) as exc:
        CaseConfig(kind="static_drop", params=Params(beta=1.0), t_end=1.0)
    assert exc.value.key == "R"
    with pytest.raises(ConfigError):
        cases.static_drop(8).replace(kind="vortex")


def test_drop_outside_domain():
    with pytest.raises(ConfigError):
        cases.static_drop(8, R=4.5)


# ----------------------------------------------------------- initialization
def test_drop_init_center_saturated():
    """Centre cell is saturated once R/eps is large (64^2: ~e^-25; 32^2 only reaches 1-3e-6)."""
    cfg = cases.static_drop(64)
    mesh = cases.build_mesh(cfg)
    s = init_case(cfg, mesh)
    centre = np.argmin(np.hypot(*(mesh.centroids - 4.0).T))
    assert s.U[centre, 3] >= 1 - 1e-6
    assert not s.U[:, :3].any()


def test_centroid_on_interface_is_half():
    cfg = cases.linear_sloshing(32, h_fill=32.5 / 32)
    mesh = cases.build_mesh(cfg)
    psi = init_case(cfg, mesh).U[:, 3]
    on = np.isclose(mesh.centroids[:, 1], 32.5 / 32, rtol=0, atol=1e-14)
    assert on.sum() == 32
    np.testing.assert_allclose(psi[on], 0.5, atol=1e-15)


@pytest.mark.parametrize("cfg", [cases.static_drop(32), cases.linear_sloshing(16),
                                 cases.capillary_wave(16), cases.rayleigh_taylor(8)],
                         ids=["drop", "slosh", "capillary", "rti"])
def test_init_invariants(cfg):
    mesh = cases.build_mesh(cfg)
    psi = init_case(cfg, mesh).U[:, 3]
    assert psi.min() > -1e-6 and psi.max() < 1 + 1e-6
    g = gradient_operator(mesh, "moore")(psi)
    top = np.argmax(np.hypot(*g.T))
    assert abs(psi[top] - 0.5) < 0.25


def test_hydrostatic_bottom_pressure():
    cfg = cases.linear_sloshing(64)
    mesh = cases.build_mesh(cfg)
    s = init_case(cfg, mesh)
    p = cfg.params.beta * s.U[:, 0]
    bottom = mesh.centroids[:, 1] < mesh.h
    assert p[bottom].mean() == pytest.approx(9810.0, rel=0.01)


def test_hydrostatic_triangles_close_to_structured():
    cfg = cases.linear_sloshing(32).replace(mesh=MeshSpec("triangles", size=0.06))
    mesh = cases.build_mesh(cfg)
    p = cfg.params.beta * init_case(cfg, mesh).U[:, 0]
    y = mesh.centroids[:, 1]
    far = y < 0.8
    np.testing.assert_allclose(p[far], 1000.0 * 9.81 * (1.0 - y[far]) + 9.81 * 1.25, rtol=2e-3)


def test_interface_outside_domain():
    with pytest.raises(ConfigError):
        cfg = cases.linear_sloshing(8, h_fill=3.0)
        init_case(cfg, cases.build_mesh(cfg))


# ------------------------------------------------------------- drop oracle
def test_exact_drop_pressure_examples():
    assert exact_drop_pressure(0.9, 1.0, 0.1, 0.9, 36.5) == pytest.approx(37.5)
    assert exact_drop_pressure(0.1, 1.0, 0.1, 0.9, 36.5) == pytest.approx(1.0)
    assert exact_drop_pressure(0.5, 1.0, 0.1, 0.9, 36.5) == pytest.approx(19.25)
    with pytest.raises(ValueError):
        exact_drop_pressure(0.5, 0.0, 0.5, 0.5, 1.0)


def test_drop_pressure_jump_value():
    cfg = cases.static_drop(16)
    assert cfg.params.sigma / cfg.R == pytest.approx(36.5)


def test_pressure_l2_examples():
    p = Params(beta=1.0)
    m2 = build_cartesian(2, 1, (2.0, 1.0))
    exact = np.array([[0.0, 0, 0, 0.0], [36.5, 0, 0, 1.0]])
    assert pressure_l2(exact, m2, p, 36.5) == 0.0
    # psi_min cell carries p_min exactly; the other cell is off by 36.5
    U = np.array([[0.0, 0, 0, 0.0], [0.0, 0, 0, 1.0]])
    assert pressure_l2(U, m2, p, 36.5) == pytest.approx(1.0, rel=1e-15)


# ---------------------------------------------------------- sloshing oracle
SLOSH = cases.linear_sloshing(32)


def test_sloshing_truncation():
    k, omega, amp = sloshing_terms(SLOSH)
    L = SLOSH.L
    assert amp[-1] < 1e-12 * L <= amp[-2]
    assert np.all(omega > 0)


@pytest.mark.parametrize("x", [0.0, 0.1, 0.25, 0.5, 0.9, 1.0])
def test_sloshing_initially_flat(x):
    assert abs(sloshing_eta_exact(x, 0.0, SLOSH)) <= 1e-10 * SLOSH.L
    # the direct partial sum with 10^4 terms approaches zero as well
    assert abs(sloshing_eta_series(x, 0.0, SLOSH, 10_000)) <= 1e-4 * SLOSH.L


@pytest.mark.parametrize("t", [0.3, 1.7, 3.9])
def test_sloshing_matches_direct_series(t):
    x = np.linspace(0.05, 0.95, 7)
    direct = np.array([sloshing_eta_series(xi, t, SLOSH, 20_000) for xi in x])
    np.testing.assert_allclose(sloshing_eta_exact(x, t, SLOSH), direct, atol=1e-5 * SLOSH.L)


@pytest.mark.parametrize("t", [0.5, 1.0, 2.5])
def test_sloshing_volume_conserved(t):
    x = np.linspace(0, SLOSH.L, 4001)
    eta = sloshing_eta_exact(x, np.full_like(x, t), SLOSH, tol=1e-9)
    vol = np.trapezoid(eta, x) if hasattr(np, "trapezoid") else np.trapz(eta, x)
    assert abs(vol) <= 1e-8
    assert np.abs(eta).max() > 1e-4


def test_sloshing_x_range():
    with pytest.raises(ValueError):
        sloshing_eta_exact(1.5, 0.0, SLOSH)


# --------------------------------------------------------- capillary oracle
CAP = cases.capillary_wave(32)


def test_capillary_initial_amplitude():
    assert capillary_amplitude_exact(0.0, CAP) == pytest.approx(0.01, rel=1e-12)


def test_capillary_inviscid_limit():
    k = 2 * np.pi
    orc = capillary_oracle(0.01, k, 1e-9, 1.0, 18.3, 18.3)
    w0 = np.sqrt(k**3 / 36.6)
    t = np.linspace(0, 2 * np.pi / w0, 200)
    np.testing.assert_allclose(orc(t), 0.01 * np.cos(w0 * t), rtol=0, atol=1e-3 * 0.01)


def test_capillary_damped_envelope():
    t = np.linspace(0, 30, 30001)
    a = capillary_amplitude_exact(t, CAP)
    # local extrema of |a| after the first one decrease monotonically
    m = np.abs(a)
    peaks = np.flatnonzero((m[1:-1] > m[:-2]) & (m[1:-1] >= m[2:])) + 1
    assert len(peaks) > 5
    assert np.all(np.diff(m[peaks]) < 0)
    assert m[peaks[-1]] < 0.5 * 0.01


def test_capillary_unequal_properties_rejected():
    with pytest.raises(OracleError):
        capillary_oracle(0.01, 6.0, 1e-3, 1.0, 1.0, 2.0)
    cfg = CAP.replace(params=Params(beta=50.0, sigma=1.0, rho1=18.3, rho2=18.3,
                                    mu1=0.1, mu2=0.2))
    with pytest.raises(OracleError):
        capillary_amplitude_exact(1.0, cfg)


# --------------------------------------------------------------- RTI theory
def test_rti_theory_examples():
    assert rti_growth_theory(k=5 / 3, gy=-1.0, rho1=1.2, rho2=0.3, sigma=0.0) == pytest.approx(1.0)
    for phi_s, expect in [(0.0, 1.0), (0.25, np.sqrt(0.75)), (0.5, np.sqrt(0.5)), (1.0, 0.0)]:
        assert rti_growth_theory(cases.rayleigh_taylor(8, phi_s=phi_s)) == pytest.approx(
            expect, rel=1e-12, abs=1e-15)
    assert rti_growth_theory(cases.rayleigh_taylor(8, phi_s=1.2)) == "stable"


# ------------------------------------------------------------------ probes
def test_flat_interface_probe():
    params = Params(beta=1.0)
    mesh = build_cartesian(16, 32, (1.0, 2.0))
    eps = interface_width(mesh.h, params)
    psi = 0.5 * (np.tanh((1.0 - mesh.centroids[:, 1]) / (2 * eps)) + 1)
    for x in (0.25, 0.5, 0.03):
        assert interface_elevation(psi, mesh, x, 1.0) == pytest.approx(1.0, abs=mesh.h / 10)


@pytest.mark.parametrize("family", ["cartesian", "triangles"])
def test_tilted_interface_probe(family):
    mesh = (build_cartesian(24, 48, (1.0, 2.0)) if family == "cartesian"
            else build_triangulated((1.0, 2.0), size=0.05))
    eps = interface_width(mesh.h, Params(beta=1.0))
    x, y = mesh.centroids.T
    level = 1.0 + 0.2 * (x - 0.5)
    psi = 0.5 * (np.tanh((level - y) / (2 * eps)) + 1)
    for xp in (0.25, 0.5, 0.7):
        assert abs(interface_elevation(psi, mesh, xp, 1.0) - (1.0 + 0.2 * (xp - 0.5))) <= mesh.h


def test_capillary_probe_initial_amplitude():
    cfg = cases.capillary_wave(32)
    mesh = cases.build_mesh(cfg)
    probes = cases.make_probes(cfg, mesh)
    a = probes["amplitude"](init_case(cfg, mesh))
    assert a == pytest.approx(0.01, abs=mesh.h / 10)


def test_probe_multiple_crossings_follows_previous():
    mesh = build_cartesian(4, 40, (1.0, 4.0))
    y = mesh.centroids[:, 1]
    psi = ((y > 1.0) & (y < 3.0)).astype(float)
    assert interface_elevation(psi, mesh, 0.5, 0.8) == pytest.approx(1.0)
    assert interface_elevation(psi, mesh, 0.5, 3.3) == pytest.approx(3.0)


def test_probe_errors():
    mesh = build_cartesian(4, 4)
    with pytest.raises(ProbeError):
        interface_elevation(np.ones(16), mesh, 0.5, 0.5)
    with pytest.raises(ProbeError):
        interface_elevation(np.ones(16), mesh, 2.0, 0.5)


def test_lenient_probe_records_nan():
    mesh = build_cartesian(4, 4)
    snap = FieldSnapshot(np.ones((16, 4)), t=3.0)
    strict = cases.ElevationProbe(mesh, 0.5, 0.5)
    with pytest.raises(ProbeError):
        strict(snap)
    lenient = cases.ElevationProbe(mesh, 0.5, 0.5, lenient=True)
    assert np.isnan(lenient(snap)) and lenient.lost_at == 3.0


def test_rti_amplitude_probe_initial():
    cfg = cases.rayleigh_taylor(16)
    mesh = cases.build_mesh(cfg)
    a = cases.make_probes(cfg, mesh)["amplitude"](init_case(cfg, mesh))
    assert a == pytest.approx(0.035, abs=mesh.h / 10)


# ----------------------------------------------------------------- metrics
def test_timeseries_l2():
    t = np.linspace(0, 2, 21)
    v = np.sin(t)
    assert timeseries_l2(t, v, v) == 0.0
    assert timeseries_l2(t, v + 0.5, v) == pytest.approx(0.5, rel=1e-14)


def test_fit_growth_exact():
    t = np.linspace(0, 5, 200)
    fit = fit_growth_rate(t, 1e-3 * np.exp(t), a0=1e-3)
    assert fit.rate == pytest.approx(1.0, abs=1e-12)
    assert fit.window == (2e-3, 1e-2)
    assert fit.r2 == pytest.approx(1.0)
    assert fit.n_samples >= 10


@given(st.integers(0, 2**32 - 1))
def test_fit_growth_noisy(seed):
    rng = np.random.default_rng(seed)
    t = np.linspace(0, 5, 400)
    a = 1e-3 * np.exp(t) * (1 + 0.01 * rng.standard_normal(t.size))
    assert fit_growth_rate(t, a, a0=1e-3).rate == pytest.approx(1.0, rel=0.02)


def test_fit_growth_empty_window():
    with pytest.raises(FitError):
        fit_growth_rate(np.linspace(0, 1, 50), np.full(50, 1e-3), a0=1e-3)


def test_effective_order_examples():
    h = np.array([1 / 32, 1 / 64, 1 / 128])
    assert effective_order(3 * h**2, h) == pytest.approx(2.0, abs=1e-12)
    # the published orders are truncated to two decimals (fits give 1.397 and 2.11x)
    assert effective_order([0.00825, 0.00374, 0.00119], h) == pytest.approx(1.39, abs=0.01)
    assert effective_order([0.00962, 0.00256, 0.00051], h) == pytest.approx(2.11, abs=0.01)
    with pytest.raises(MetricError):
        effective_order([0.1, 0.0], [1.0, 0.5])
    with pytest.raises(MetricError):
        effective_order([0.1], [1.0])

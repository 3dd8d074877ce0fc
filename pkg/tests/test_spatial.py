import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wc2p import cases
from wc2p.errors import GeometryError
from wc2p.mesh import PERIODIC, build_cartesian, build_triangulated
from wc2p.model import Params, nc_matrix_x, nc_matrix_y
from wc2p.spatial import (curvature, interface_width, limit_gradients, reconstruct_face_states,
                          scls_normal, unit_normal, volume_noncons_term, wls_gradient)
from wc2p.stepper import extend_state

MESHES = {
    "cartesian": lambda: build_cartesian(12, 9, (1.2, 0.9)),
    "triangles": lambda: build_triangulated((1.0, 1.0), size=0.12),
    "periodic": lambda: build_cartesian(8, 6, (1.0, 1.0),
                                        boundary_spec={"left": PERIODIC, "right": PERIODIC}),
}


@pytest.fixture(params=sorted(MESHES))
def mesh(request):
    return MESHES[request.param]()


def test_interface_width():
    assert interface_width(0.5, Params(beta=1.0)) == pytest.approx(0.5 * 0.5**0.9, rel=1e-15)


@pytest.mark.parametrize("stencil", ["moore", "von_neumann"])
def test_wls_affine_exact(mesh, stencil):
    x, y = mesh.centroids.T
    if mesh.periodic_translations:
        f = -2.0 * y + 0.0 * x      # periodic in x: only the y-part is affine across the seam
        expect = (0.0, -2.0)
    else:
        f = 3.0 * x - 2.0 * y
        expect = (3.0, -2.0)
    g = wls_gradient(f, mesh, stencil)
    np.testing.assert_allclose(g, np.broadcast_to(expect, g.shape), atol=1e-10)


def test_wls_constant(mesh):
    assert np.abs(wls_gradient(np.full(mesh.n_cells, 4.2), mesh)).max() <= 1e-12


def test_wls_quadratic_refinement():
    errs = []
    for n in (16, 32):
        m = build_cartesian(n, n)
        x, y = m.centroids.T
        g = wls_gradient(x**2, m)
        interior = (x > 0.2) & (x < 0.8) & (y > 0.2) & (y < 0.8)
        errs.append(np.abs(g[interior, 0] - 2 * x[interior]).max())
    # the Moore stencil is symmetric on squares, so the interior error is round-off
    assert errs[1] <= max(0.6 * errs[0], 1e-10)


def test_wls_rank_deficient():
    m = build_cartesian(3, 1)
    with pytest.raises(GeometryError) as exc:
        wls_gradient(np.zeros(3), m)
    assert exc.value.cell is not None


def _face_extrapolations(values, grad, mesh):
    """(cell, value at each face midpoint) for every cell face."""
    out = []
    for f in range(mesh.n_faces):
        for c in (mesh.face_left[f], mesh.face_right[f]):
            if c >= 0:
                d = mesh.face_mid[f] - mesh.centroids[c]
                out.append((c, values[c] + grad[c] @ d))
    return out


def _bounds(values, mesh):
    lo = np.array([min(values[i], *values[mesh.von_neumann[i]]) for i in range(mesh.n_cells)])
    hi = np.array([max(values[i], *values[mesh.von_neumann[i]]) for i in range(mesh.n_cells)])
    return lo, hi


def test_limiter_affine_interior_unclipped():
    m = build_cartesian(10, 10)
    x, y = m.centroids.T
    f = 3 * x - 2 * y
    lim = limit_gradients(f, wls_gradient(f, m), m)
    interior = (x > 0.1) & (x < 0.9) & (y > 0.1) & (y < 0.9)
    np.testing.assert_allclose(lim.phi[interior], 1.0, atol=1e-12)


def test_limiter_constant():
    m = build_triangulated(size=0.2)
    f = np.full(m.n_cells, 2.0)
    lim = limit_gradients(f, wls_gradient(f, m), m)
    assert np.all(lim.phi == 1.0)
    assert np.abs(lim.grad).max() <= 1e-13


def test_limiter_step_profile():
    m = build_cartesian(12, 4)
    x = m.centroids[:, 0]
    f = np.where(x < 0.5, 1.0, 0.0)
    lim = limit_gradients(f, wls_gradient(f, m), m)
    lo, hi = _bounds(f, m)
    for c, v in _face_extrapolations(f, lim.grad, m):
        assert lo[c] - 1e-12 <= v <= hi[c] + 1e-12
    near = np.abs(x - 0.5) < 0.1
    assert np.all(lim.phi[near] < 1.0)


@given(st.integers(0, 10_000))
@settings(max_examples=25)
def test_limiter_bounded_random(seed):
    rng = np.random.default_rng(seed)
    m = MESHES["triangles"]()
    f = rng.normal(size=m.n_cells)
    lim = limit_gradients(f, wls_gradient(f, m), m)
    assert np.all((lim.phi >= 0) & (lim.phi <= 1))
    lo, hi = _bounds(f, m)
    for c, v in _face_extrapolations(f, lim.grad, m):
        assert lo[c] - 1e-12 <= v <= hi[c] + 1e-12


def _affine_state(mesh, p):
    x, y = mesh.centroids.T
    return np.stack([0.1 + x, 2.0 - y, 0.5 * x, 0.3 + 0.2 * x + 0.1 * y], axis=1)


def test_reconstruct_first_order():
    m = build_cartesian(5, 4)
    p = Params(beta=1e3)
    U = _affine_state(m, p)
    Ue = extend_state(U, m)
    UL, UR, nfb = reconstruct_face_states(U, Ue, None, m, 1, p)
    lay = m.layout
    np.testing.assert_array_equal(UL, U[lay.left])
    np.testing.assert_array_equal(UR, Ue[lay.right])
    assert nfb == 0


def test_reconstruct_affine_exact():
    m = build_triangulated((1.0, 1.0), size=0.15)
    p = Params(beta=1e3)
    U = _affine_state(m, p)
    grad = np.stack([wls_gradient(U[:, k], m) for k in range(4)], axis=1)
    UL, UR, nfb = reconstruct_face_states(U, extend_state(U, m), grad, m, 2, p)
    lay = m.layout
    x, y = lay.mid.T
    exact = np.stack([0.1 + x, 2.0 - y, 0.5 * x, 0.3 + 0.2 * x + 0.1 * y], axis=1)
    inner = ~lay.is_ghost
    np.testing.assert_allclose(UL, exact, atol=1e-12)
    np.testing.assert_allclose(UR[inner], exact[inner], atol=1e-12)
    assert nfb == 0


def test_reconstruct_fallback_counts():
    m = build_cartesian(4, 1)
    p = Params(beta=1e3, rho1=1000.0, rho2=1.0)
    U = np.zeros((4, 4))
    U[:, 3] = [0.0, 0.0, 1.0, 1.0]
    grad = np.zeros((4, 4, 2))
    grad[1, 3, 0] = -10.0       # drives psi far below zero at the left face of cell 1
    UL, UR, nfb = reconstruct_face_states(U, extend_state(U, m), grad, m, 2, p)
    assert nfb >= 1
    assert np.all(p.rho2 + p.drho * UL[:, 3] > 0)


def test_scls_normal_examples():
    p = Params(beta=1.0)
    eps = 0.1
    np.testing.assert_array_equal(scls_normal(np.zeros(2), eps, p), [0.0, 0.0])
    g = np.array([1.0 / (4 * eps), 0.0])
    n = scls_normal(g, eps, p)
    direct = g[0] / np.sqrt(g[0] ** 2 + eps * np.exp(-p.delta * eps**2 * g[0] ** 2))
    assert n[0] == pytest.approx(direct, rel=1e-15)
    assert 0.5 < n[0] <= 1.0


@given(st.floats(-50, 50), st.floats(-50, 50), st.floats(0.01, 100), st.floats(0.005, 0.4))
def test_scls_normal_parallel_and_bounded(gx, gy, c, eps):
    """The far-field bound needs delta*eps^3 <= 1, true for every eps = h^0.9/2 with h <= 0.5."""
    p = Params(beta=1.0)
    g = np.array([gx, gy])
    n1 = scls_normal(g, eps, p)
    n2 = scls_normal(c * g, eps, p)
    assert np.hypot(*n1) <= 1 + 1e-12
    assert abs(n2[0] * g[1] - n2[1] * g[0]) <= 1e-12 * (1 + np.abs(g).max())
    if np.hypot(*g) <= eps:
        assert np.hypot(*n1) <= np.sqrt(eps) * np.hypot(*g) / eps + 1e-15


def test_unit_normal_floor():
    n = unit_normal(np.array([[3.0, 4.0], [1e-20, 0.0], [0.0, 0.0]]), 1e-9)
    np.testing.assert_allclose(n[0], [0.6, 0.8], rtol=1e-15)
    assert np.abs(n[1]).max() < 1e-10 and np.all(n[2] == 0.0)


def _drop_field(n):
    cfg = cases.static_drop(n)
    m = cases.build_mesh(cfg)
    return cfg, m, cases.init_case(cfg, m).U[:, 3]


def test_curvature_drop_64():
    cfg, m, psi = _drop_field(64)
    c = curvature(psi, m, cfg.params)
    r = np.hypot(*(m.centroids - 4.0).T)
    band = np.abs(psi - 0.5) < 0.4
    assert np.abs(c.kappa[band] * r[band] - 1.0).max() <= 0.06
    core = np.abs(psi - 0.5) < 0.3
    assert np.abs(c.kappa[core] / 0.5 - 1.0).max() <= 0.10
    assert np.all(c.kappa[band] > 0)
    assert np.all(np.isfinite(c.kappa))
    assert np.hypot(*c.normal.T).max() <= 1 + 1e-12


@pytest.mark.xfail(strict=True, reason="level sets at |psi-0.5|=0.4 sit 0.17 m off R=2; "
                                        "their own curvature is already 8% below 0.5")
def test_curvature_drop_64_band_against_constant():
    cfg, m, psi = _drop_field(64)
    c = curvature(psi, m, cfg.params)
    band = np.abs(psi - 0.5) < 0.4
    assert np.abs(c.kappa[band] / 0.5 - 1.0).max() <= 0.10


def test_curvature_converges():
    errs = []
    for n in (32, 64, 128):
        cfg, m, psi = _drop_field(n)
        c = curvature(psi, m, cfg.params)
        band = np.abs(psi - 0.5) < 0.4
        errs.append(np.abs(c.kappa[band] - 0.5).max())
    assert errs[0] > errs[1] > errs[2]


def test_curvature_planar():
    m = build_cartesian(16, 32)
    p = Params(beta=1.0)
    eps = interface_width(m.h, p)
    y = m.centroids[:, 1]
    psi = 0.5 * (np.tanh((0.5 - y) / (2 * eps)) + 1)
    c = curvature(psi, m, p)
    band = np.abs(psi - 0.5) < 0.4
    assert np.abs(c.kappa[band]).max() <= 1e-8 / m.h
    np.testing.assert_allclose(c.kappa_face[m.layout.is_ghost],
                               c.kappa[m.layout.left[m.layout.is_ghost]])


def test_curvature_scls_variant_is_bounded():
    cfg, m, psi = _drop_field(32)
    c = curvature(psi, m, cfg.params, normal="scls")
    assert np.hypot(*c.normal.T).max() <= 1.0
    with pytest.raises(ValueError):
        curvature(psi, m, cfg.params, normal="bogus")


def test_volume_term_zero_gradients_and_uniform():
    p = Params(beta=1e3, sigma=1.0, rho1=3.0, rho2=1.0)
    U = np.tile([0.1, 0.4, -0.2, 0.6], (5, 1))
    out = volume_noncons_term(U, np.zeros((5, 4, 2)), np.ones(5), np.ones(5), p)
    assert np.all(out == 0.0)


def test_volume_term_quadrature():
    """Equal densities keep B constant, so 5x5 midpoint quadrature is exact."""
    p = Params(beta=1e3, sigma=2.0, rho1=1.5, rho2=1.5)
    kappa = 0.7
    c0 = np.array([0.3, 0.2])
    h = 0.1
    U0 = np.array([0.02, 0.6, -0.45, 0.4])
    G = np.array([[1.5, -0.5], [0.0, 0.0], [0.0, 0.0], [0.8, 1.2]])
    got = volume_noncons_term(U0[None], G[None], np.array([kappa]), np.array([h * h]), p)[0]
    s = (np.arange(5) + 0.5) / 5 - 0.5
    acc = np.zeros(4)
    for a in s:
        for b in s:
            U = U0 + G @ (np.array([a, b]) * h)
            acc += (nc_matrix_x(U, kappa, p) @ G[:, 0] + nc_matrix_y(U, kappa, p) @ G[:, 1])
    acc *= h * h / 25
    np.testing.assert_allclose(got, acc, rtol=1e-10, atol=1e-12)

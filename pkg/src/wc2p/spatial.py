"""Cell gradients, slope limiting, face reconstruction and interface geometry.

Least-squares gradients are linear in the data, so each stencil is factored
once per mesh and stored as a pair of sparse operators ``Gx``, ``Gy`` acting
on an extended value array ``[cells | wall ghosts]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import GeometryError
from .mesh import Mesh
from .model import Params, mixture_density

_RANK_TOL = 1e-10
_LIMIT_TOL = 1e-13


def interface_width(h: float, params: Params) -> float:
    """Phase-field width eps = h^(1-d)/2 for average mesh size h."""
    return 0.5 * h ** (1.0 - params.d)


class LeastSquares:
    """Inverse-distance weighted least-squares gradient operator.

    With ``ghosts=True`` the stencil of a cell also contains the mirror
    image of every wall face sharing one of its vertices; otherwise only
    real cells (and periodic images) are used.
    """

    def __init__(self, mesh: Mesh, stencil: str = "moore", ghosts: bool = False):
        if stencil not in ("moore", "von_neumann"):
            raise ValueError(f"unknown stencil {stencil!r}")
        self.mesh = mesh
        self.stencil = stencil
        self.ghosts = ghosts
        lay = mesh.layout
        n = mesh.n_cells
        self.n_ext = lay.n_ext if ghosts else n

        nbrs, offs = [], []
        for i in range(n):
            if stencil == "moore":
                js = mesh.moore[i]
                d = mesh.centroids[js] + mesh.moore_shift[i] - mesh.centroids[i]
            else:
                js = mesh.von_neumann[i]
                d = mesh.centroids[js] - mesh.centroids[i]
                d = d + mesh.nearest_image(mesh.centroids[js], mesh.centroids[i])
            nbrs.append(list(js))
            offs.append(list(d))
        if ghosts:
            # a ghost joins every cell sharing a vertex with its wall face, so
            # wall cells see the mirror images of their diagonal neighbours too
            for g, f in enumerate(lay.ghost_face):
                touching = set()
                for v in mesh.face_vertices[f]:
                    touching.update(int(c) for c in mesh.cells_touching_vertex(int(v)))
                for i in sorted(touching):
                    nbrs[i].append(n + g)
                    offs[i].append(lay.ghost_center[g] - mesh.centroids[i])

        rows, cols, vx, vy = [], [], [], []
        sizes = np.array([len(js) for js in nbrs])
        for k in np.unique(sizes):
            idx = np.flatnonzero(sizes == k)
            if k < 2:
                raise GeometryError(f"stencil of cell {int(idx[0])} has fewer than 2 neighbours",
                                    cell=int(idx[0]))
            D = np.array([offs[i] for i in idx], dtype=float).reshape(len(idx), k, 2)
            w = 1.0 / np.hypot(D[..., 0], D[..., 1])
            Q, R = np.linalg.qr(w[..., None] * D)
            r00 = np.abs(R[:, 0, 0])
            r11 = np.abs(R[:, 1, 1])
            bad = ~(r11 > _RANK_TOL * np.maximum(r00, 1e-300))
            if np.any(bad):
                c = int(idx[np.flatnonzero(bad)[0]])
                raise GeometryError(f"rank-deficient gradient stencil at cell {c}", cell=c)
            # coefficients C = R^{-1} Q^T W, shape (m, 2, k)
            C = np.linalg.solve(R, np.swapaxes(Q, 1, 2)) * w[:, None, :]
            J = np.array([nbrs[i] for i in idx], dtype=np.int64)
            rows.append(np.repeat(idx, k))
            cols.append(J.ravel())
            vx.append(C[:, 0, :].ravel())
            vy.append(C[:, 1, :].ravel())
            rows.append(idx)
            cols.append(idx)
            vx.append(-C[:, 0, :].sum(axis=1))
            vy.append(-C[:, 1, :].sum(axis=1))
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        shape = (n, self.n_ext)
        self.Gx = sp.csr_matrix((np.concatenate(vx), (rows, cols)), shape=shape)
        self.Gy = sp.csr_matrix((np.concatenate(vy), (rows, cols)), shape=shape)

    def __call__(self, values):
        """Gradient of per-cell values; trailing axis of length 2 is appended."""
        values = np.asarray(values, dtype=float)
        return np.stack([self.Gx @ values, self.Gy @ values], axis=-1)


def gradient_operator(mesh: Mesh, stencil: str = "moore", ghosts: bool = False) -> LeastSquares:
    """Cached operator for ``mesh`` (meshes are immutable)."""
    cache = mesh.__dict__.setdefault("_ops", {})
    key = ("wls", stencil, ghosts)
    if key not in cache:
        cache[key] = LeastSquares(mesh, stencil, ghosts)
    return cache[key]


def wls_gradient(values, mesh: Mesh, stencil: str = "moore"):
    """Per-cell gradient of cell values using real cells only."""
    return gradient_operator(mesh, stencil, ghosts=False)(values)


# ------------------------------------------------------------------ limiting
@dataclass
class GradientField:
    grad: np.ndarray      # (N, 4, 2) limited gradients
    phi: np.ndarray       # (N, 4) limiter factors
    raw: np.ndarray       # (N, 4, 2) unlimited gradients


def _face_offsets(mesh: Mesh):
    cache = mesh.__dict__.setdefault("_ops", {})
    if "face_offsets" not in cache:
        cf = mesh.cell_faces
        valid = cf >= 0
        mid = mesh.face_mid[np.where(valid, cf, 0)]
        off = mid - mesh.centroids[:, None, :]
        cache["face_offsets"] = np.where(valid[..., None], off, 0.0)
    return cache["face_offsets"]


def limit_gradients(values, gradients, mesh: Mesh, values_ext=None) -> GradientField:
    """Component-wise Barth-Jespersen limiting.

    ``values`` is (N,) or (N, m); bounds come from each cell and its edge
    neighbours (``values_ext`` supplies ghost values when given).
    """
    values = np.asarray(values, dtype=float)
    gradients = np.asarray(gradients, dtype=float)
    scalar = values.ndim == 1
    if scalar:
        values = values[:, None]
        gradients = gradients[:, None, :]
        if values_ext is not None:
            values_ext = np.asarray(values_ext, dtype=float)[:, None]
    lay = mesh.layout
    if values_ext is None:
        nb = lay.neighbors
        nb = np.where(nb >= mesh.n_cells, np.arange(mesh.n_cells)[:, None], nb)
        src = values
    else:
        nb = lay.neighbors
        src = values_ext
    stencil = src[nb]                                  # (N, k, m)
    vmax = np.maximum(stencil.max(axis=1), values)
    vmin = np.minimum(stencil.min(axis=1), values)

    off = _face_offsets(mesh)                          # (N, kf, 2)
    delta = np.einsum("nfd,nmd->nfm", off, gradients)  # (N, kf, m)
    up = (vmax - values)[:, None, :]
    dn = (vmin - values)[:, None, :]
    # extrapolations at round-off level (e.g. the WLS gradient of a constant) are not clipped
    tol = (_LIMIT_TOL * (np.abs(values) + (vmax - vmin)))[:, None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(delta > tol, up / delta, np.where(delta < -tol, dn / delta, 1.0))
    r = np.where(np.isfinite(r), r, 1.0)
    phi = np.clip(r, 0.0, 1.0).min(axis=1)
    limited = gradients * phi[..., None]
    if scalar:
        return GradientField(limited[:, 0], phi[:, 0], gradients[:, 0])
    return GradientField(limited, phi, gradients)


def reconstruct_face_states(U, U_ext, grad, mesh: Mesh, order: int, params: Params):
    """Face-midpoint states on every flux face of the solver layout.

    Returns ``(U_left, U_right, n_fallback)`` in the global frame.  Right
    states on wall faces are left empty (NaN) and filled by the caller.
    """
    lay = mesh.layout
    UL = U[lay.left].copy()
    UR = U_ext[lay.right].copy()
    if order == 1:
        return UL, UR, 0
    if order != 2:
        raise ValueError(f"order must be 1 or 2, got {order}")
    dl = lay.mid - mesh.centroids[lay.left]
    UL += np.einsum("fmd,fd->fm", grad[lay.left], dl)
    inner = ~lay.is_ghost
    rc = lay.right[inner]
    dr = lay.mid[inner] - lay.right_center[inner]
    UR[inner] += np.einsum("fmd,fd->fm", grad[rc], dr)
    bad = ~(mixture_density(UL[:, 3], params) > 0)
    bad[inner] |= ~(mixture_density(UR[inner, 3], params) > 0)
    nbad = int(np.count_nonzero(bad))
    if nbad:
        UL[bad] = U[lay.left[bad]]
        UR[bad] = U_ext[lay.right[bad]]
    return UL, UR, nbad


# -------------------------------------------------------------- interface
def scls_normal(grad_psi, eps: float, params: Params):
    """Regularized interface normal, diminished far from the interface."""
    g = np.asarray(grad_psi, dtype=float)
    g2 = g[..., 0] ** 2 + g[..., 1] ** 2
    denom = np.sqrt(g2 + eps * np.exp(-params.delta * eps**2 * g2))
    return g / denom[..., None]


@dataclass
class CurvatureField:
    normal: np.ndarray        # (N, 2)
    kappa: np.ndarray         # (N,)
    kappa_face: np.ndarray    # per flux face of the solver layout
    grad_psi: np.ndarray      # (N, 2) unlimited WLS gradient of psi


def extend_scalar(values, mesh: Mesh):
    """Append ghost copies (even reflection) to per-cell scalars."""
    lay = mesh.layout
    return np.concatenate([values, values[mesh.face_left[lay.ghost_face]]])


def extend_vector(vec, mesh: Mesh):
    """Append mirrored ghost vectors (normal component reversed)."""
    lay = mesh.layout
    inner = vec[mesh.face_left[lay.ghost_face]]
    n = lay.ghost_normal
    vn = np.einsum("gd,gd->g", inner, n)
    return np.concatenate([vec, inner - 2.0 * vn[:, None] * n])


def face_average(cell_values, mesh: Mesh):
    """Mean of the two cells on each flux face; wall faces copy the interior."""
    lay = mesh.layout
    right = np.where(lay.is_ghost, lay.left, lay.right)
    return 0.5 * (cell_values[lay.left] + cell_values[right])


def unit_normal(grad_psi, floor: float = 0.0):
    """grad(psi)/|grad(psi)|, with |grad(psi)| regularized as sqrt(|g|^2 + floor^2).

    A floor at round-off scale leaves the normal unit-length across the
    interface but sends it smoothly to zero where psi has saturated and its
    gradient is pure rounding noise.
    """
    g = np.asarray(grad_psi, dtype=float)
    mag = np.sqrt(g[..., 0] ** 2 + g[..., 1] ** 2 + floor**2)
    return g / np.maximum(mag, 1e-300)[..., None]


# gradient floor of the curvature normal, in units of 1/h
NORMAL_FLOOR = 1e-9


CURVATURE_NORMALS = ("unit", "scls")


def curvature(psi, mesh: Mesh, params: Params, eps: float | None = None,
              ghosts: bool = True, normal: str = "unit",
              normal_floor: float = NORMAL_FLOOR) -> CurvatureField:
    """Three-step WLS curvature: grad(psi) -> normal -> kappa = -div(n).

    ``normal="unit"`` differentiates grad(psi)/|grad(psi)|; ``"scls"`` uses the
    regularized normal instead.
    """
    if normal not in CURVATURE_NORMALS:
        raise ValueError(f"unknown curvature normal {normal!r}")
    psi = np.asarray(psi, dtype=float)
    if eps is None:
        eps = interface_width(mesh.h, params)
    op = gradient_operator(mesh, "moore", ghosts=ghosts)
    src = extend_scalar(psi, mesh) if ghosts else psi
    g = op(src)
    n = (scls_normal(g, eps, params) if normal == "scls"
         else unit_normal(g, normal_floor / mesh.h))
    n_src = extend_vector(n, mesh) if ghosts else n
    dnx = op.Gx @ n_src[:, 0]
    dny = op.Gy @ n_src[:, 1]
    kappa = -(dnx + dny)
    return CurvatureField(normal=n, kappa=kappa, kappa_face=face_average(kappa, mesh),
                          grad_psi=g)


def volume_noncons_term(U_bar, grad, kappa_cell, areas, params: Params):
    """[B_x(U) dU/dx + B_y(U) dU/dy] * area for every cell.

    ``grad`` has shape (N, 4, 2) and holds the limited conserved gradients.
    """
    U_bar = np.asarray(U_bar, dtype=float)
    rho = mixture_density(U_bar[:, 3], params)
    u = U_bar[:, 1] / rho
    v = U_bar[:, 2] / rho
    gx = grad[..., 0]
    gy = grad[..., 1]
    sk = params.sigma * np.asarray(kappa_cell, dtype=float)
    out = np.zeros_like(U_bar)
    out[:, 0] = (u * (gx[:, 0] - params.drho * gx[:, 3])
                 + v * (gy[:, 0] - params.drho * gy[:, 3]))
    out[:, 1] = -sk * gx[:, 3]
    out[:, 2] = -sk * gy[:, 3]
    return out * np.asarray(areas, dtype=float)[:, None]

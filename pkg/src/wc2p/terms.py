"""Viscous stresses, gravity, interface regularization and the velocity scale.

Face gradients use a Green-Gauss integral around the diamond formed by the
two cell centroids on either side of a face and the two face vertices.
Vertex values are inverse-distance averages of the surrounding cells, so
the whole face-gradient map is linear and is assembled once as sparse
operators on the extended ``[cells | wall ghosts]`` array.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .errors import GeometryError
from .mesh import Mesh
from .model import Params, mix_properties
from .spatial import scls_normal


class DiamondGradient:
    """Sparse face-gradient operators ``Dx``, ``Dy`` (flux faces x extended cells)."""

    def __init__(self, mesh: Mesh):
        lay = mesh.layout
        n = mesh.n_cells
        ne = lay.n_ext

        # vertex interpolation: real cells (with periodic images) plus wall ghosts
        ghost_of_vertex = {}
        for g, f in enumerate(lay.ghost_face):
            for v in mesh.face_vertices[f]:
                ghost_of_vertex.setdefault(int(mesh.vertex_class[v]), []).append(g)
        rows, cols, vals = [], [], []
        for v in range(len(mesh.vertices)):
            xv = mesh.vertices[v]
            cells = mesh.cells_touching_vertex(v)
            pos = mesh.centroids[cells]
            pos = pos + mesh.nearest_image(pos, np.broadcast_to(xv, pos.shape))
            ids = list(cells)
            pts = list(pos)
            for g in ghost_of_vertex.get(int(mesh.vertex_class[v]), []):
                gc = lay.ghost_center[g]
                gc = gc + mesh.nearest_image(gc, xv)[0]
                ids.append(n + g)
                pts.append(gc)
            d = np.hypot(*(np.array(pts) - xv).T)
            w = 1.0 / np.maximum(d, 1e-300)
            w /= w.sum()
            rows.extend([v] * len(ids))
            cols.extend(ids)
            vals.extend(w)
        self.vertex_interp = sp.csr_matrix((vals, (rows, cols)), shape=(len(mesh.vertices), ne))

        nf = len(lay.flux_face)
        fv = mesh.face_vertices[lay.flux_face]
        pa = mesh.vertices[fv[:, 0]]
        pb = mesh.vertices[fv[:, 1]]
        pl = mesh.centroids[lay.left]
        pr = lay.right_center
        # polygon L -> a -> R -> b; contributions of each corner value
        P = np.stack([pl, pa, pr, pb], axis=1)                   # (nf, 4, 2)
        Pn = np.roll(P, -1, axis=1)
        area = 0.5 * np.sum(P[..., 0] * Pn[..., 1] - Pn[..., 0] * P[..., 1], axis=1)
        scale = mesh.face_length[lay.flux_face] ** 2
        bad = ~(np.abs(area) > 1e-12 * scale)
        if np.any(bad):
            f = int(lay.flux_face[np.flatnonzero(bad)[0]])
            raise GeometryError(f"degenerate diamond at face {f}", face=f)
        # edge k joins corner k and k+1 with outward normal*length (dy, -dx)
        e = Pn - P
        nl = np.stack([e[..., 1], -e[..., 0]], axis=-1)          # (nf, 4, 2)
        # corner k collects half of edges k-1 and k
        corner = 0.5 * (nl + np.roll(nl, 1, axis=1)) / area[:, None, None]
        self.area = np.abs(area)

        va = self.vertex_interp[fv[:, 0]]
        vb = self.vertex_interp[fv[:, 1]]
        fidx = np.arange(nf)
        ops = []
        for comp in range(2):
            cl = sp.csr_matrix((corner[:, 0, comp], (fidx, lay.left)), shape=(nf, ne))
            cr = sp.csr_matrix((corner[:, 2, comp], (fidx, lay.right)), shape=(nf, ne))
            op = (cl + cr + sp.diags(corner[:, 1, comp]) @ va
                  + sp.diags(corner[:, 3, comp]) @ vb)
            ops.append(op.tocsr())
        self.Dx, self.Dy = ops

    def __call__(self, values_ext):
        values_ext = np.asarray(values_ext, dtype=float)
        return np.stack([self.Dx @ values_ext, self.Dy @ values_ext], axis=-1)


def diamond_operator(mesh: Mesh) -> DiamondGradient:
    cache = mesh.__dict__.setdefault("_ops", {})
    if "diamond" not in cache:
        cache["diamond"] = DiamondGradient(mesh)
    return cache["diamond"]


def _open_faces(mesh: Mesh):
    """Flux faces that carry diffusive fluxes (walls do not)."""
    return ~mesh.layout.is_ghost


def viscous_face_flux(vel_ext, psi_face, mesh: Mesh, params: Params):
    """(F_v n_x + G_v n_y) * length on every flux face, shape (F, 4).

    ``vel_ext`` is (N_ext, 2) cell velocities with mirrored wall ghosts;
    ``psi_face`` is the face phase field used for the mixture viscosity.
    """
    lay = mesh.layout
    out = np.zeros((len(lay.flux_face), 4))
    if params.mu1 == 0.0 and params.mu2 == 0.0:
        return out
    D = diamond_operator(mesh)
    gu = D(vel_ext[:, 0])
    gv = D(vel_ext[:, 1])
    _, mu = mix_properties(psi_face, params, check=False)
    nx, ny = lay.normal[:, 0], lay.normal[:, 1]
    shear = mu * (gu[:, 1] + gv[:, 0])
    out[:, 1] = (2 * mu * gu[:, 0] * nx + shear * ny) * lay.length
    out[:, 2] = (shear * nx + 2 * mu * gv[:, 1] * ny) * lay.length
    out[~_open_faces(mesh)] = 0.0
    return out


def gravity_source(U_bar, areas, params: Params):
    """(0, rho g_x, rho g_y, 0) * area per cell."""
    U_bar = np.asarray(U_bar, dtype=float)
    rho, _ = mix_properties(U_bar[..., 3], params, check=False)
    out = np.zeros_like(U_bar)
    gx, gy = params.gravity
    out[..., 1] = rho * gx
    out[..., 2] = rho * gy
    return out * np.asarray(areas, dtype=float)[..., None]


def regularization_face_flux(psi_ext, psi_face, gamma: float, eps: float,
                             mesh: Mesh, params: Params):
    """f_R . n * length on every flux face (psi equation only), shape (F,)."""
    lay = mesh.layout
    out = np.zeros(len(lay.flux_face))
    if gamma == 0.0:
        return out
    g = diamond_operator(mesh)(psi_ext)
    n = scls_normal(g, eps, params)
    gn = np.einsum("fd,fd->f", g, n)
    nn = np.einsum("fd,fd->f", n, n)
    f = (eps * gn[:, None] * n + (1.0 - nn)[:, None] * eps * g
         - (psi_face * (1.0 - psi_face))[:, None] * n)
    out = gamma * np.einsum("fd,fd->f", f, lay.normal) * lay.length
    out[~_open_faces(mesh)] = 0.0
    return out


def velocity_scale(U, params: Params) -> float:
    """Maximum cell speed |v| (the regularization velocity scale gamma)."""
    U = np.asarray(U, dtype=float)
    if U.size == 0:
        return 0.0
    rho, _ = mix_properties(U[..., 3], params, check=False)
    speed = np.hypot(U[..., 1] / rho, U[..., 2] / rho)
    return float(np.max(speed))

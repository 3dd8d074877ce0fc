"""Two-dimensional polygonal meshes with the adjacency the scheme needs.

Topology is stored as flat numpy arrays and never modified after
construction.  Boundary edges carry a group name of the form
``<kind>[:<label>]`` where kind is ``slip_wall``, ``symmetry`` or
``periodic``; periodic edges of one group are paired by translation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, GeometryError, MeshError

SLIP_WALL = "slip_wall"
SYMMETRY = "symmetry"
PERIODIC = "periodic"
BOUNDARY_KINDS = (SLIP_WALL, SYMMETRY, PERIODIC)

KIND_INTERIOR, KIND_SLIP, KIND_SYMMETRY, KIND_PERIODIC = 0, 1, 2, 3
_KIND_CODE = {SLIP_WALL: KIND_SLIP, SYMMETRY: KIND_SYMMETRY, PERIODIC: KIND_PERIODIC}
_CODE_KIND = {v: k for k, v in _KIND_CODE.items()}

HEADER = "wc2p-mesh v1"


@dataclass(frozen=True)
class BoundaryTag:
    kind: str
    partner: int | None = None


@dataclass(frozen=True)
class Cell:
    vertices: tuple
    centroid: tuple
    area: float
    faces: tuple


@dataclass(frozen=True)
class Face:
    vertices: tuple
    left: int
    right: int | BoundaryTag
    normal: tuple
    length: float
    midpoint: tuple


def _polygon_area_centroid(xy):
    x, y = xy[:, 0], xy[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * cross.sum()
    if area == 0.0:
        return 0.0, xy.mean(axis=0)
    cx = ((x + xn) * cross).sum() / (6 * area)
    cy = ((y + yn) * cross).sum() / (6 * area)
    return area, np.array([cx, cy])


def _kind_of(group: str) -> str:
    kind = group.split(":", 1)[0]
    if kind not in BOUNDARY_KINDS:
        raise ConfigError(f"unknown boundary kind {kind!r} in group {group!r}", key="boundary")
    return kind


class Mesh:
    """Immutable unstructured mesh of convex polygons."""

    def __init__(self, vertices, cells, boundary_edges: Mapping[tuple, str],
                 cell_lines: Sequence[int] | None = None, structured=None):
        self.vertices = np.asarray(vertices, dtype=float).reshape(-1, 2)
        nv = len(self.vertices)
        self.structured = structured
        lines = list(cell_lines) if cell_lines is not None else [None] * len(cells)

        fixed = []
        seen = {}
        areas, cents = [], []
        for c, verts in enumerate(cells):
            verts = tuple(int(v) for v in verts)
            if len(verts) < 3:
                raise MeshError(f"cell {c} has fewer than 3 vertices", line=lines[c])
            if min(verts) < 0 or max(verts) >= nv:
                raise MeshError(f"cell {c} references a missing vertex", line=lines[c])
            if len(set(verts)) != len(verts):
                raise MeshError(f"cell {c} repeats a vertex", line=lines[c])
            key = tuple(sorted(verts))
            if key in seen:
                raise MeshError(f"cell {c} duplicates cell {seen[key]}", line=lines[c])
            seen[key] = c
            area, cen = _polygon_area_centroid(self.vertices[list(verts)])
            if area < 0:
                verts = verts[::-1]
                area, cen = -area, cen
            fixed.append(verts)
            areas.append(area)
            cents.append(cen)
        self.cell_vertices = fixed
        self.areas = np.array(areas, dtype=float)
        self.centroids = np.array(cents, dtype=float).reshape(-1, 2)
        self._build_faces(boundary_edges, lines)
        self._build_periodic()
        self._build_adjacency()

    # ------------------------------------------------------------------ faces
    def _build_faces(self, boundary_edges, lines):
        nv = len(self.vertices)
        ev0, ev1, ecell = [], [], []
        for c, verts in enumerate(self.cell_vertices):
            k = len(verts)
            for a in range(k):
                ev0.append(verts[a])
                ev1.append(verts[(a + 1) % k])
                ecell.append(c)
        ev0 = np.array(ev0, dtype=np.int64)
        ev1 = np.array(ev1, dtype=np.int64)
        ecell = np.array(ecell, dtype=np.int64)
        keys = np.minimum(ev0, ev1) * nv + np.maximum(ev0, ev1)
        uniq, first, inverse, counts = np.unique(
            keys, return_index=True, return_inverse=True, return_counts=True)
        if np.any(counts > 2):
            bad = int(np.flatnonzero(counts > 2)[0])
            cell = int(ecell[inverse == bad][-1])
            raise MeshError(f"non-manifold edge shared by {counts[bad]} cells (cell {cell})",
                            line=lines[cell])
        # faces numbered by first appearance so ids follow cell order
        order = np.argsort(first, kind="stable")
        rank = np.empty_like(order)
        rank[order] = np.arange(len(order))
        face_of_edge = rank[inverse]
        nf = len(uniq)

        left = np.full(nf, -1, dtype=np.int64)
        right = np.full(nf, -1, dtype=np.int64)
        fv = np.zeros((nf, 2), dtype=np.int64)
        for e in range(len(keys)):
            f = face_of_edge[e]
            if left[f] < 0:
                left[f] = ecell[e]
                fv[f] = (ev0[e], ev1[e])
            else:
                right[f] = ecell[e]
        self.face_vertices = fv
        self.face_left = left
        self.face_right = right

        p0 = self.vertices[fv[:, 0]]
        p1 = self.vertices[fv[:, 1]]
        d = p1 - p0
        length = np.hypot(d[:, 0], d[:, 1])
        with np.errstate(invalid="ignore", divide="ignore"):
            normal = np.stack([d[:, 1], -d[:, 0]], axis=1) / length[:, None]
        self.face_length = length
        self.face_normal = normal
        self.face_mid = 0.5 * (p0 + p1)

        kind = np.zeros(nf, dtype=np.int8)
        group = [""] * nf
        key_to_face = dict(zip((uniq[order]).tolist(), range(nf)))
        for (a, b), name in boundary_edges.items():
            a, b = int(a), int(b)
            k = min(a, b) * nv + max(a, b)
            f = key_to_face.get(k)
            if f is None:
                raise MeshError(f"boundary edge ({a}, {b}) is not an edge of any cell")
            if right[f] >= 0:
                raise MeshError(f"boundary edge ({a}, {b}) is an interior edge")
            kind[f] = _KIND_CODE[_kind_of(name)]
            group[f] = name
        missing = np.flatnonzero((right < 0) & (kind == KIND_INTERIOR))
        if missing.size:
            f = int(missing[0])
            raise MeshError(f"boundary edge {tuple(fv[f])} has no boundary tag")
        self.face_kind = kind
        self.face_group = group

        kmax = max(len(v) for v in self.cell_vertices)
        cf = np.full((len(self.cell_vertices), kmax), -1, dtype=np.int64)
        fill = np.zeros(len(self.cell_vertices), dtype=np.int64)
        for f in range(nf):
            for c in (left[f], right[f]):
                if c >= 0:
                    cf[c, fill[c]] = f
                    fill[c] += 1
        self.cell_faces = cf

    def _build_periodic(self):
        nf = self.n_faces
        self.face_partner = np.full(nf, -1, dtype=np.int64)
        self.face_shift = np.zeros((nf, 2))
        groups = {}
        for f in np.flatnonzero(self.face_kind == KIND_PERIODIC):
            groups.setdefault(self.face_group[f], []).append(int(f))
        self.periodic_translations = []
        for name, faces in groups.items():
            faces = np.array(faces)
            n0 = self.face_normal[faces[0]]
            side = self.face_normal[faces] @ n0
            a = faces[side > 0]
            b = faces[side < 0]
            if len(a) != len(b) or len(a) == 0:
                raise ConfigError(f"periodic group {name!r} does not split into two matching sides",
                                  key="boundary")
            T = self.face_mid[b].mean(axis=0) - self.face_mid[a].mean(axis=0)
            tol = 1e-9 * max(1.0, float(np.abs(T).max()))
            for fa in a:
                target = self.face_mid[fa] + T
                dist = np.hypot(*(self.face_mid[b] - target).T)
                j = int(np.argmin(dist))
                fb = int(b[j])
                if (dist[j] > tol or self.face_partner[fb] >= 0
                        or abs(self.face_length[fa] - self.face_length[fb]) > 1e-12
                        or np.abs(self.face_normal[fa] + self.face_normal[fb]).max() > 1e-12):
                    raise ConfigError(f"periodic face {fa} in group {name!r} has no matching partner",
                                      key="boundary")
                self.face_partner[fa] = fb
                self.face_partner[fb] = fa
                self.face_shift[fa] = -T
                self.face_shift[fb] = T
            self.periodic_translations.append(T)

        # vertices identified across periodic pairs
        parent = np.arange(len(self.vertices))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for fa in np.flatnonzero(self.face_partner >= 0):
            fb = self.face_partner[fa]
            if fa > fb:
                continue
            shift = self.face_shift[fb]  # maps a-side positions onto the b side
            for va in self.face_vertices[fa]:
                pos = self.vertices[va] + shift
                cand = self.face_vertices[fb]
                vb = cand[np.argmin(np.hypot(*(self.vertices[cand] - pos).T))]
                ra, rb = find(va), find(vb)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
        self.vertex_class = np.array([find(i) for i in range(len(self.vertices))])

    def _candidate_shifts(self):
        shifts = [np.zeros(2)]
        for T in self.periodic_translations:
            shifts = [s + k * T for s in shifts for k in (-1, 0, 1)]
        return np.unique(np.round(np.array(shifts), 14), axis=0)

    def nearest_image(self, points, targets):
        """Periodic shift placing each point nearest to its target."""
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        targets = np.asarray(targets, dtype=float).reshape(-1, 2)
        if not self.periodic_translations:
            return np.zeros_like(points)
        cand = self._candidate_shifts()
        d = points[:, None, :] + cand[None, :, :] - targets[:, None, :]
        k = np.argmin(np.einsum("pci,pci->pc", d, d), axis=1)
        return cand[k]

    def _build_adjacency(self):
        n = self.n_cells
        fl, fr = self.face_left, self.face_right.copy()
        per = self.face_partner >= 0
        fr[per] = fl[self.face_partner[per]]
        conn = fr >= 0
        vn = [set() for _ in range(n)]
        for a, b in zip(fl[conn], fr[conn]):
            if a != b:
                vn[a].add(int(b))
                vn[b].add(int(a))
        self.von_neumann = [np.array(sorted(s), dtype=np.int64) for s in vn]

        rows, cols = [], []
        for c, verts in enumerate(self.cell_vertices):
            for v in verts:
                rows.append(c)
                cols.append(self.vertex_class[v])
        inc = sp.csr_matrix((np.ones(len(rows)), (rows, cols)),
                            shape=(n, len(self.vertices)))
        adj = (inc @ inc.T).tocsr()
        adj.setdiag(0)
        adj.eliminate_zeros()
        adj.sort_indices()
        self.moore = [adj.indices[adj.indptr[i]:adj.indptr[i + 1]].astype(np.int64)
                      for i in range(n)]
        ii = np.repeat(np.arange(n), np.diff(adj.indptr))
        jj = adj.indices.astype(np.int64)
        shift = self.nearest_image(self.centroids[jj], self.centroids[ii])
        self.moore_shift = np.split(shift, adj.indptr[1:-1])
        self._vertex_cells = inc.T.tocsr()

    # --------------------------------------------------------------- queries
    @property
    def n_cells(self) -> int:
        return len(self.cell_vertices)

    @property
    def n_faces(self) -> int:
        return len(self.face_left)

    @cached_property
    def h(self) -> float:
        """Average mesh size sqrt(total area / number of cells)."""
        return float(np.sqrt(self.areas.sum() / self.n_cells))

    @cached_property
    def cell_h(self):
        return np.sqrt(self.areas)

    @cached_property
    def bounding_box(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def boundary_tag(self, f: int) -> BoundaryTag | None:
        code = int(self.face_kind[f])
        if code == KIND_INTERIOR:
            return None
        partner = int(self.face_partner[f]) if code == KIND_PERIODIC else None
        return BoundaryTag(_CODE_KIND[code], partner)

    def cell(self, i: int) -> Cell:
        faces = tuple(int(f) for f in self.cell_faces[i] if f >= 0)
        return Cell(tuple(self.cell_vertices[i]), tuple(self.centroids[i]),
                    float(self.areas[i]), faces)

    def face(self, f: int) -> Face:
        right = int(self.face_right[f])
        return Face(tuple(int(v) for v in self.face_vertices[f]), int(self.face_left[f]),
                    right if right >= 0 else self.boundary_tag(f),
                    tuple(self.face_normal[f]), float(self.face_length[f]),
                    tuple(self.face_mid[f]))

    def cells_touching_vertex(self, v: int):
        m = self._vertex_cells
        k = self.vertex_class[v]
        return m.indices[m.indptr[k]:m.indptr[k + 1]]

    @cached_property
    def closure_residual(self):
        """Per-cell |sum of outward normal times face length|."""
        acc = np.zeros((self.n_cells, 2))
        w = self.face_normal * self.face_length[:, None]
        np.add.at(acc, self.face_left, w)
        inner = self.face_right >= 0
        np.add.at(acc, self.face_right[inner], -w[inner])
        return np.hypot(acc[:, 0], acc[:, 1])

    # ------------------------------------------------------------- solver view
    @cached_property
    def layout(self) -> "SolverLayout":
        return SolverLayout.build(self)


@dataclass
class SolverLayout:
    """Face and ghost arrangement used by the finite-volume operators.

    Ghost slots follow the cells in an "extended" array: index ``n_cells + g``
    belongs to wall/symmetry face ``ghost_face[g]``.  Each periodic pair is
    represented by one flux face whose right side is the partner's cell.
    """

    n_cells: int
    ghost_face: np.ndarray
    ghost_center: np.ndarray
    ghost_normal: np.ndarray
    flux_face: np.ndarray
    left: np.ndarray
    right: np.ndarray
    is_ghost: np.ndarray
    normal: np.ndarray
    length: np.ndarray
    mid: np.ndarray
    right_center: np.ndarray
    neighbors: np.ndarray = field(repr=False)

    @property
    def n_ext(self) -> int:
        return self.n_cells + len(self.ghost_face)

    @classmethod
    def build(cls, mesh: Mesh) -> "SolverLayout":
        n = mesh.n_cells
        kind = mesh.face_kind
        walls = np.flatnonzero((kind == KIND_SLIP) | (kind == KIND_SYMMETRY))
        ghost_slot = np.full(mesh.n_faces, -1, dtype=np.int64)
        ghost_slot[walls] = n + np.arange(len(walls))
        c = mesh.centroids[mesh.face_left[walls]]
        nrm = mesh.face_normal[walls]
        dist = np.einsum("ij,ij->i", mesh.face_mid[walls] - c, nrm)
        ghost_center = c + 2 * dist[:, None] * nrm

        per = mesh.face_partner
        master = (kind == KIND_PERIODIC) & (np.arange(mesh.n_faces) < per)
        flux = np.flatnonzero((kind != KIND_PERIODIC) | master)
        left = mesh.face_left[flux]
        right = mesh.face_right[flux].copy()
        right_center = np.zeros((len(flux), 2))
        is_ghost = np.zeros(len(flux), dtype=bool)
        for k, f in enumerate(flux):
            if kind[f] == KIND_INTERIOR:
                right_center[k] = mesh.centroids[right[k]]
            elif kind[f] == KIND_PERIODIC:
                right[k] = mesh.face_left[per[f]]
                right_center[k] = mesh.centroids[right[k]] + mesh.face_shift[f]
            else:
                right[k] = ghost_slot[f]
                right_center[k] = ghost_center[ghost_slot[f] - n]
                is_ghost[k] = True

        kmax = mesh.cell_faces.shape[1]
        nb = np.full((n, kmax), -1, dtype=np.int64)
        fill = np.zeros(n, dtype=np.int64)
        for a, b, g in zip(left, right, is_ghost):
            nb[a, fill[a]] = b
            fill[a] += 1
            if not g:
                nb[b, fill[b]] = a
                fill[b] += 1
        # pad with the cell itself so padded slots never change min/max
        own = np.repeat(np.arange(n)[:, None], kmax, axis=1)
        nb = np.where(nb < 0, own, nb)
        return cls(
            n_cells=n, ghost_face=walls, ghost_center=ghost_center, ghost_normal=nrm,
            flux_face=flux, left=left, right=right, is_ghost=is_ghost,
            normal=mesh.face_normal[flux], length=mesh.face_length[flux],
            mid=mesh.face_mid[flux], right_center=right_center, neighbors=nb,
        )


# ------------------------------------------------------------------ builders
_SIDES = ("left", "right", "bottom", "top")


def _resolve_sides(boundary_spec):
    spec = {s: SLIP_WALL for s in _SIDES}
    if boundary_spec:
        for side, kind in dict(boundary_spec).items():
            if side not in spec:
                raise ConfigError(f"unknown side {side!r}", key="boundary")
            kind = kind.kind if isinstance(kind, BoundaryTag) else str(kind)
            if kind not in BOUNDARY_KINDS:
                raise ConfigError(f"unknown boundary kind {kind!r} for side {side}", key="boundary")
            spec[side] = kind
    for a, b in (("left", "right"), ("bottom", "top")):
        if (spec[a] == PERIODIC) != (spec[b] == PERIODIC):
            raise ConfigError(f"periodic sides must be paired: {a}={spec[a]}, {b}={spec[b]}",
                              key="boundary")
    return spec


def _side_group(side, kind):
    if kind == PERIODIC:
        return "periodic:x" if side in ("left", "right") else "periodic:y"
    return f"{kind}:{side}"


def build_cartesian(nx: int, ny: int, extent=(1.0, 1.0), origin=(0.0, 0.0),
                    boundary_spec=None) -> Mesh:
    """Uniform rectangular mesh; ``boundary_spec`` maps side name to kind."""
    if nx < 1 or ny < 1:
        raise ConfigError("nx and ny must be at least 1", key="mesh")
    lx, ly = float(extent[0]), float(extent[1])
    if not (lx > 0 and ly > 0):
        raise ConfigError("extent must be positive", key="mesh")
    spec = _resolve_sides(boundary_spec)
    x = origin[0] + lx * np.arange(nx + 1) / nx
    y = origin[1] + ly * np.arange(ny + 1) / ny
    X, Y = np.meshgrid(x, y)
    verts = np.stack([X.ravel(), Y.ravel()], axis=1)

    def vid(i, j):
        return j * (nx + 1) + i

    cells = [(vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1))
             for j in range(ny) for i in range(nx)]
    edges = {}
    for i in range(nx):
        edges[(vid(i, 0), vid(i + 1, 0))] = _side_group("bottom", spec["bottom"])
        edges[(vid(i + 1, ny), vid(i, ny))] = _side_group("top", spec["top"])
    for j in range(ny):
        edges[(vid(0, j + 1), vid(0, j))] = _side_group("left", spec["left"])
        edges[(vid(nx, j), vid(nx, j + 1))] = _side_group("right", spec["right"])
    structured = {"nx": nx, "ny": ny, "origin": (float(origin[0]), float(origin[1])),
                  "extent": (lx, ly)}
    return Mesh(verts, cells, edges, structured=structured)


def _graded_points(a, b, size: Callable[[float], float]):
    """Points from a to b with local spacing ~size(position), endpoints included."""
    length = b - a
    s = [0.0]
    while s[-1] < length:
        s.append(s[-1] + size(a + s[-1]))
    n = max(1, len(s) - 1)
    # rescale so the last interval lands on b exactly
    t = np.array(s[: n + 1]) * (length / s[n]) if s[n] > 0 else np.linspace(0, length, n + 1)
    t[-1] = length
    return a + t


def build_triangulated(extent=(1.0, 1.0), origin=(0.0, 0.0), size=0.1,
                       boundary_spec=None) -> Mesh:
    """Delaunay triangle mesh of a rectangle.

    ``size`` is a target edge length, either a constant or a function of y
    (used to refine near a horizontal interface).
    """
    from scipy.spatial import Delaunay

    spec = _resolve_sides(boundary_spec)
    size_fn = size if callable(size) else (lambda _y, s=float(size): s)
    x0, y0 = map(float, origin)
    lx, ly = map(float, extent)
    x1, y1 = x0 + lx, y0 + ly

    ys = _graded_points(y0, y1, size_fn)
    hb, ht = size_fn(y0), size_fn(y1)
    xb = np.linspace(x0, x1, max(1, int(round(lx / hb))) + 1)
    xt = np.linspace(x0, x1, max(1, int(round(lx / ht))) + 1)
    if spec["bottom"] == PERIODIC and len(xb) != len(xt):
        xt = xb
    pts = [(x, y0) for x in xb] + [(x, y1) for x in xt]
    pts += [(x0, y) for y in ys[1:-1]] + [(x1, y) for y in ys[1:-1]]

    # interior: staggered rows, spacing from the local size
    y = y0
    row = 0
    while True:
        s = size_fn(y)
        y = y + s * np.sqrt(3) / 2
        if y >= y1 - 0.5 * size_fn(y1):
            break
        s = size_fn(y)
        if y - y0 < 0.5 * s:
            continue
        nxr = max(1, int(round(lx / s)))
        dx = lx / nxr
        off = 0.5 * dx if row % 2 else 0.0
        for k in range(nxr + 1):
            x = x0 + off + k * dx
            if x0 + 0.5 * dx <= x <= x1 - 0.5 * dx:
                pts.append((x, y))
        row += 1
    pts = np.array(pts)
    tri = Delaunay(pts)
    simp = tri.simplices
    a = pts[simp]
    area = 0.5 * ((a[:, 1, 0] - a[:, 0, 0]) * (a[:, 2, 1] - a[:, 0, 1])
                  - (a[:, 2, 0] - a[:, 0, 0]) * (a[:, 1, 1] - a[:, 0, 1]))
    keep = np.abs(area) > 1e-12 * lx * ly
    simp = simp[keep]

    tol = 1e-12 * max(lx, ly)
    edges = {}
    for c in simp:
        for k in range(3):
            i, j = int(c[k]), int(c[(k + 1) % 3])
            pi, pj = pts[i], pts[j]
            for side, coord, val in (("left", 0, x0), ("right", 0, x1),
                                     ("bottom", 1, y0), ("top", 1, y1)):
                if abs(pi[coord] - val) < tol and abs(pj[coord] - val) < tol:
                    edges[(i, j)] = _side_group(side, spec[side])
    return Mesh(pts, [tuple(c) for c in simp], edges)


# ---------------------------------------------------------------- native I/O
def import_mesh(text: str) -> Mesh:
    """Parse the native line-oriented ASCII mesh document."""
    lines = []
    for no, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if body:
            lines.append((no, body.split()))
    it = iter(lines)

    def take(expect=None):
        try:
            no, tok = next(it)
        except StopIteration:
            raise MeshError("unexpected end of document") from None
        if expect and tok[0] != expect:
            raise MeshError(f"expected '{expect}', found '{tok[0]}'", line=no)
        return no, tok

    no, tok = take()
    if " ".join(tok) != HEADER:
        raise MeshError(f"missing header '{HEADER}'", line=no)

    def count(tok, no):
        try:
            return int(tok[1])
        except (IndexError, ValueError):
            raise MeshError(f"bad count in '{' '.join(tok)}'", line=no) from None

    no, tok = take("vertices")
    nv = count(tok, no)
    verts = []
    for _ in range(nv):
        no, tok = take()
        try:
            verts.append((float(tok[0]), float(tok[1])))
        except (IndexError, ValueError):
            raise MeshError("vertex line needs two numbers", line=no) from None
    no, tok = take("cells")
    nc = count(tok, no)
    cells, cell_lines = [], []
    for _ in range(nc):
        no, tok = take()
        try:
            k = int(tok[0])
            ids = [int(t) for t in tok[1:]]
        except ValueError:
            raise MeshError("cell line must contain integers", line=no) from None
        if k not in (3, 4) or len(ids) != k:
            raise MeshError("cell line must be 'k id1..idk' with k in {3, 4}", line=no)
        if min(ids) < 0 or max(ids) >= nv:
            raise MeshError(f"dangling vertex id in cell {len(cells)}", line=no)
        cells.append(ids)
        cell_lines.append(no)
    no, tok = take("boundary")
    ng = count(tok, no)
    edges = {}
    for _ in range(ng):
        no, tok = take("tag")
        if len(tok) != 3:
            raise MeshError("group header must be 'tag name count'", line=no)
        name = tok[1]
        try:
            _kind_of(name)
        except ConfigError as exc:
            raise MeshError(str(exc), line=no) from None
        ne = count(tok[1:], no)
        for _ in range(ne):
            no, tok = take()
            try:
                a, b = int(tok[0]), int(tok[1])
            except (IndexError, ValueError):
                raise MeshError("edge line needs two vertex ids", line=no) from None
            if not (0 <= a < nv and 0 <= b < nv):
                raise MeshError("dangling vertex id in boundary edge", line=no)
            edges[(a, b)] = name
    extra = next(it, None)
    if extra is not None:
        raise MeshError("trailing content after boundary groups", line=extra[0])
    return Mesh(verts, cells, edges, cell_lines=cell_lines)


def render_mesh(mesh: Mesh) -> str:
    """Native ASCII document for ``mesh`` (inverse of :func:`import_mesh`)."""
    out = [HEADER, f"vertices {len(mesh.vertices)}"]
    out += [f"{x:.17g} {y:.17g}" for x, y in mesh.vertices]
    out.append(f"cells {mesh.n_cells}")
    out += [f"{len(c)} " + " ".join(map(str, c)) for c in mesh.cell_vertices]
    groups = {}
    for f in np.flatnonzero(mesh.face_kind != KIND_INTERIOR):
        groups.setdefault(mesh.face_group[f], []).append(mesh.face_vertices[f])
    out.append(f"boundary {len(groups)}")
    for name, edges in groups.items():
        out.append(f"tag {name} {len(edges)}")
        out += [f"{a} {b}" for a, b in edges]
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------- validation
@dataclass
class MeshReport:
    max_closure_residual: float
    min_area: float
    min_face_length: float
    max_normal_error: float
    degenerate_cells: list
    orphan_cells: list
    neighbor_sets_nested: bool
    problems: list

    @property
    def passed(self) -> bool:
        return not self.problems

    def __str__(self):
        lines = [
            f"max closure residual : {self.max_closure_residual:.3e}",
            f"min cell area        : {self.min_area:.6g}",
            f"min face length      : {self.min_face_length:.6g}",
            f"max |n|-1            : {self.max_normal_error:.3e}",
            f"status               : {'PASS' if self.passed else 'FAIL'}",
        ]
        lines += [f"  - {p}" for p in self.problems]
        return "\n".join(lines)


def validate_mesh(mesh: Mesh, tol: float = 1e-12) -> MeshReport:
    problems = []
    with np.errstate(invalid="ignore"):
        nerr = np.abs(np.hypot(mesh.face_normal[:, 0], mesh.face_normal[:, 1]) - 1.0)
    nerr = np.where(np.isfinite(nerr), nerr, np.inf)
    degenerate = [int(c) for c in np.flatnonzero(~(mesh.areas > 0))]
    if degenerate:
        problems.append(f"non-positive area in cells {degenerate[:10]}")
    short = np.flatnonzero(~(mesh.face_length > 0))
    if short.size:
        problems.append(f"zero-length faces {short[:10].tolist()}")
    if nerr.max(initial=0.0) > tol:
        problems.append(f"non-unit face normal (max error {nerr.max():.3e})")
    # closure is relative to the cell perimeter scale
    scale = np.maximum(mesh.cell_h, 1.0)
    resid = mesh.closure_residual
    worst = float(np.max(resid / scale)) if mesh.n_cells else 0.0
    if worst > tol:
        problems.append(f"open cell polygon in cell {int(np.argmax(resid / scale))} "
                        f"(residual {worst:.3e})")
    orphan = [i for i in range(mesh.n_cells)
              if mesh.n_cells > 1 and len(mesh.von_neumann[i]) == 0]
    if orphan:
        problems.append(f"cells without edge neighbours {orphan[:10]}")
    nested = all(set(mesh.von_neumann[i].tolist()) <= set(mesh.moore[i].tolist())
                 for i in range(mesh.n_cells))
    if not nested:
        problems.append("von Neumann set not contained in Moore set")
    for f in np.flatnonzero(mesh.face_kind == KIND_PERIODIC):
        p = mesh.face_partner[f]
        if p < 0 or abs(mesh.face_length[f] - mesh.face_length[p]) > tol:
            problems.append(f"periodic face {int(f)} badly paired")
            break
    return MeshReport(
        max_closure_residual=float(resid.max(initial=0.0)),
        min_area=float(mesh.areas.min(initial=np.inf)),
        min_face_length=float(mesh.face_length.min(initial=np.inf)),
        max_normal_error=float(nerr.max(initial=0.0)),
        degenerate_cells=degenerate,
        orphan_cells=orphan,
        neighbor_sets_nested=nested,
        problems=problems,
    )


def require_valid(mesh: Mesh) -> Mesh:
    report = validate_mesh(mesh)
    if not report.passed:
        raise GeometryError("invalid mesh: " + "; ".join(report.problems))
    return mesh

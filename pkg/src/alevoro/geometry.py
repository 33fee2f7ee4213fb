"""Delaunay triangulation and barycenter-based Voronoi tessellation.

Voronoi-type polygons are built by connecting counterclockwise the
barycenters of the Delaunay triangles incident to each generator, which
avoids the degeneracies of circumcenter constructions.  Only generators
interior to the triangulated hull own a polygon; a frame of fixed
generators outside the physical domain closes all boundary fans.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Delaunay, cKDTree

from . import basis
from .errors import CollinearInput, DegeneratePolygon, DuplicatePoint, OpenFan, OutsideHull


@dataclass(frozen=True)
class GeneratorSet:
    """Generator points with per-point fixed flags; indices are stable for a run."""

    positions: np.ndarray  # (Np, 2)
    fixed: np.ndarray      # (Np,) bool

    def moved(self, new_positions: np.ndarray) -> "GeneratorSet":
        out = np.array(new_positions, dtype=float)
        out[self.fixed] = self.positions[self.fixed]
        return GeneratorSet(out, self.fixed)


@dataclass
class VoronoiMesh:
    """Immutable-by-convention tessellation snapshot at one time level."""

    points: np.ndarray          # (Np,2) generators
    fixed: np.ndarray           # (Np,) bool
    simplices: np.ndarray       # (T,3) CCW triangles
    tri_nbr: np.ndarray         # (T,3) adjacency, -1 on hull (opposite vertex k)
    tri_bary: np.ndarray        # (T,2)
    hull_gen: np.ndarray        # (Np,) bool, generators on the convex hull
    cell_of_gen: np.ndarray     # (Np,) int, -1 if no polygon
    gen_of_cell: np.ndarray     # (Nc,) int
    fan_ptr: np.ndarray         # (Nc+1,)
    fan_tri: np.ndarray         # (F,) triangle id of vertex slot (CCW)
    fan_nbr: np.ndarray         # (F,) neighbor generator of edge slot k (d_k -> d_{k+1})
    area: np.ndarray            # (Nc,)
    bary: np.ndarray            # (Nc,2)
    perim: np.ndarray           # (Nc,)
    h: np.ndarray               # (Nc,) circumradius about the barycenter
    _moment_cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_cells(self) -> int:
        return len(self.gen_of_cell)

    @property
    def verts(self) -> np.ndarray:
        return self.tri_bary[self.fan_tri]

    def fan_slice(self, c: int) -> slice:
        return slice(self.fan_ptr[c], self.fan_ptr[c + 1])

    def cell_verts(self, c: int) -> np.ndarray:
        return self.tri_bary[self.fan_tri[self.fan_slice(c)]]

    def cell_neighbors(self, c: int) -> np.ndarray:
        return self.fan_nbr[self.fan_slice(c)]

    def moments(self, deg: int) -> np.ndarray:
        """Raw monomial moments about each cell barycenter, all cells, p+q <= deg."""
        if deg not in self._moment_cache:
            self._moment_cache[deg] = _mesh_moments(self, deg)
        return self._moment_cache[deg]


def build_delaunay(points: np.ndarray, merge_tol: float = 1e-12):
    """Delaunay triangulation with CCW simplices and symmetric adjacency.

    Raises CollinearInput for rank-deficient input and DuplicatePoint when two
    generators are closer than merge_tol times the point-cloud scale.
    """
    pts = np.asarray(points, dtype=float)
    if len(pts) >= 2:
        scale = max(np.ptp(pts[:, 0]), np.ptp(pts[:, 1]), 1.0)
        dist, idx = cKDTree(pts).query(pts, k=2)
        if np.any(dist[:, 1] < merge_tol * scale):
            k = int(np.argmin(dist[:, 1]))
            raise DuplicatePoint(f"generators {k} and {idx[k, 1]} coincide")
    try:
        tri = Delaunay(pts)
    except Exception as exc:  # qhull reports degenerate input
        raise CollinearInput(str(exc)) from exc
    if tri.simplices.shape[0] == 0:
        raise CollinearInput("no triangles produced")
    simplices = tri.simplices.copy()
    nbr = tri.neighbors.copy()
    v = pts[simplices]
    orient = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
    flip = orient < 0
    simplices[flip, 1], simplices[flip, 2] = simplices[flip, 2], simplices[flip, 1].copy()
    nbr[flip, 1], nbr[flip, 2] = nbr[flip, 2], nbr[flip, 1].copy()
    hull = np.zeros(len(pts), dtype=bool)
    hull[np.unique(tri.convex_hull)] = True
    return simplices, nbr, hull


def locate_point(points, simplices, tri_nbr, x, hint: int = 0) -> int:
    """Jump-and-walk location of the triangle containing x (boundary inclusive)."""
    x = np.asarray(x, dtype=float)
    k = int(hint)
    ntri = len(simplices)
    if not 0 <= k < ntri:
        k = 0
    scale = 1.0
    for _ in range(4 * ntri + 8):
        tri = simplices[k]
        v = points[tri]
        scale = max(abs(v).max(), 1.0)
        worst = None
        worst_val = -1e-13 * scale * scale
        for j in range(3):
            a = v[(j + 1) % 3]
            b = v[(j + 2) % 3]
            s = (b[0] - a[0]) * (x[1] - a[1]) - (b[1] - a[1]) * (x[0] - a[0])
            if s < worst_val:
                worst_val = s
                worst = j
        if worst is None:
            return k
        nxt = tri_nbr[k, worst]
        if nxt == -1:
            raise OutsideHull(f"point {x} outside the triangulated hull")
        k = int(nxt)
    raise OutsideHull(f"walk failed to terminate for {x}")


def build_voronoi(points: np.ndarray, fixed: np.ndarray, merge_tol: float = 1e-12) -> VoronoiMesh:
    """Build the barycenter-based Voronoi tessellation of the generator set."""
    pts = np.asarray(points, dtype=float)
    simplices, tri_nbr, hull = build_delaunay(pts, merge_tol)
    tri_bary = pts[simplices].mean(axis=1)

    ntri = len(simplices)
    gen = simplices.ravel()
    trid = np.repeat(np.arange(ntri), 3)
    keep = ~hull[gen]
    gen = gen[keep]
    trid = trid[keep]
    if len(gen) == 0:
        raise OpenFan("no interior generator owns a closed fan")
    rel = tri_bary[trid] - pts[gen]
    ang = np.arctan2(rel[:, 1], rel[:, 0])
    order = np.lexsort((ang, gen))
    gen = gen[order]
    trid = trid[order]

    cells = np.unique(gen)
    cell_of_gen = np.full(len(pts), -1, dtype=np.int64)
    cell_of_gen[cells] = np.arange(len(cells))
    counts = np.bincount(cell_of_gen[gen], minlength=len(cells))
    if np.any(counts < 3):
        raise OpenFan("generator with fewer than three incident triangles")
    fan_ptr = np.concatenate([[0], np.cumsum(counts)])

    # neighbor of edge slot k: vertex shared by fan triangles k and k+1, != generator
    nxt = np.arange(len(trid)) + 1
    last = fan_ptr[1:] - 1
    nxt[last] = fan_ptr[:-1]
    A = simplices[trid]
    B = simplices[trid[nxt]]
    shared = (A[:, :, None] == B[:, None, :]).any(axis=2) & (A != gen[:, None])
    nsh = shared.sum(axis=1)
    if np.any(nsh != 1):
        raise OpenFan("fan triangles out of order (inconsistent triangulation)")
    fan_nbr = A[np.arange(len(A)), np.argmax(shared, axis=1)]

    verts = tri_bary[trid]
    vx = verts[:, 0]
    vy = verts[:, 1]
    cross = vx * verts[nxt, 1] - verts[nxt, 0] * vy
    area2 = np.add.reduceat(cross, fan_ptr[:-1])
    area = 0.5 * area2
    if np.any(area <= 0):
        raise DegeneratePolygon("non-positive polygon area")
    cx = np.add.reduceat((vx + verts[nxt, 0]) * cross, fan_ptr[:-1]) / (3.0 * area2)
    cy = np.add.reduceat((vy + verts[nxt, 1]) * cross, fan_ptr[:-1]) / (3.0 * area2)
    bary = np.stack([cx, cy], axis=-1)
    elen = np.linalg.norm(verts[nxt] - verts, axis=1)
    perim = np.add.reduceat(elen, fan_ptr[:-1])
    rad = np.linalg.norm(verts - bary[cell_of_gen[gen]], axis=1)
    h = np.maximum.reduceat(rad, fan_ptr[:-1])

    return VoronoiMesh(
        points=pts, fixed=np.asarray(fixed, dtype=bool),
        simplices=simplices, tri_nbr=tri_nbr, tri_bary=tri_bary,
        hull_gen=hull, cell_of_gen=cell_of_gen, gen_of_cell=cells,
        fan_ptr=fan_ptr, fan_tri=trid, fan_nbr=fan_nbr,
        area=area, bary=bary, perim=perim, h=h,
    )


def subtriangle_signed_areas(mesh: VoronoiMesh) -> np.ndarray:
    """Signed areas of the barycenter-fanned sub-triangles, per fan slot."""
    verts = mesh.verts
    nxt = _next_slot(mesh)
    anchor = mesh.bary[_cell_of_slot(mesh)]
    e1 = verts - anchor
    e2 = verts[nxt] - anchor
    return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def cell_metrics(mesh: VoronoiMesh, c: int, area_tol: float = 1e-14) -> dict:
    if mesh.area[c] < area_tol:
        raise DegeneratePolygon(f"cell {c} area below tolerance")
    return {
        "area": float(mesh.area[c]),
        "barycenter": mesh.bary[c].copy(),
        "perimeter": float(mesh.perim[c]),
        "h": float(mesh.h[c]),
    }


def _cell_of_slot(mesh: VoronoiMesh) -> np.ndarray:
    out = np.empty(mesh.fan_ptr[-1], dtype=np.int64)
    for c in range(mesh.n_cells):
        out[mesh.fan_ptr[c]:mesh.fan_ptr[c + 1]] = c
    return out


def _next_slot(mesh: VoronoiMesh) -> np.ndarray:
    nxt = np.arange(mesh.fan_ptr[-1]) + 1
    nxt[mesh.fan_ptr[1:] - 1] = mesh.fan_ptr[:-1]
    return nxt


def _mesh_moments(mesh: VoronoiMesh, deg: int) -> np.ndarray:
    """Edge-Green raw moments about each cell's barycenter, (Nc, nmono)."""
    ex = basis.mono_exponents(deg)
    g = basis.gl_rule(deg // 2 + 2)
    s = g.points[:, 0]
    w = g.weights
    verts = mesh.verts
    nxt = _next_slot(mesh)
    anchor = mesh.bary[_cell_of_slot(mesh)]
    v0 = verts - anchor
    v1 = verts[nxt] - anchor
    xs = v0[:, None, 0] * (1 - s) + v1[:, None, 0] * s
    ys = v0[:, None, 1] * (1 - s) + v1[:, None, 1] * s
    dy = v1[:, 1] - v0[:, 1]
    pxmax = deg + 1
    px = np.empty(xs.shape + (pxmax + 1,))
    px[..., 0] = 1.0
    for p in range(1, pxmax + 1):
        px[..., p] = px[..., p - 1] * xs
    py = np.empty(ys.shape + (deg + 1,))
    py[..., 0] = 1.0
    for q in range(1, deg + 1):
        py[..., q] = py[..., q - 1] * ys
    out = np.empty((mesh.n_cells, len(ex)))
    for i, (p, q) in enumerate(ex):
        edge = np.einsum("es,s->e", px[..., p + 1] * py[..., q], w) * dy / (p + 1)
        out[:, i] = np.add.reduceat(edge, mesh.fan_ptr[:-1])
    return out


# ---------------------------------------------------------------------------
# generator layouts


def lattice_generators(box, nx: int, frame_rings: int = 2, fixed_rows: int = 2,
                       jitter: float = 0.0, seed: int = 0) -> GeneratorSet:
    """Cell-centered lattice over box plus frame_rings of outside generators.

    box = (x0, x1, y0, y1).  Spacing is (x1-x0)/nx in both directions; ny is
    rounded to fill the y extent.  Generators within fixed_rows lattice rows
    of the box edge (or outside it) are flagged fixed and receive no jitter.
    """
    x0, x1, y0, y1 = box
    a = (x1 - x0) / nx
    ny = max(1, round((y1 - y0) / a))
    ii = np.arange(-frame_rings, nx + frame_rings)
    jj = np.arange(-frame_rings, ny + frame_rings)
    X, Y = np.meshgrid(x0 + (ii + 0.5) * a, y0 + (jj + 0.5) * a, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], axis=-1)
    margin = fixed_rows * a
    fixed = (
        (pts[:, 0] < x0 + margin) | (pts[:, 0] > x1 - margin)
        | (pts[:, 1] < y0 + margin) | (pts[:, 1] > y1 - margin)
    )
    if jitter > 0:
        rng = np.random.default_rng(seed)
        dx = rng.uniform(-jitter * a, jitter * a, size=pts.shape)
        pts = pts + np.where(fixed[:, None], 0.0, dx)
    return GeneratorSet(pts, fixed)


# ---------------------------------------------------------------------------
# debug output


def dump_vtk(mesh: VoronoiMesh, path, cell_data: dict | None = None) -> None:
    """Legacy-VTK ASCII polydata dump of the tessellation."""
    lines = ["# vtk DataFile Version 3.0", "alevoro tessellation", "ASCII",
             "DATASET POLYDATA", f"POINTS {len(mesh.tri_bary)} double"]
    for p in mesh.tri_bary:
        lines.append(f"{p[0]:.16e} {p[1]:.16e} 0.0")
    size = mesh.n_cells + mesh.fan_ptr[-1]
    lines.append(f"POLYGONS {mesh.n_cells} {size}")
    for c in range(mesh.n_cells):
        ids = mesh.fan_tri[mesh.fan_slice(c)]
        lines.append(" ".join([str(len(ids))] + [str(int(t)) for t in ids]))
    if cell_data:
        lines.append(f"CELL_DATA {mesh.n_cells}")
        for name, arr in cell_data.items():
            arr = np.asarray(arr)
            if arr.ndim == 1:
                lines.append(f"SCALARS {name} double 1")
                lines.append("LOOKUP_TABLE default")
                lines.extend(f"{v:.16e}" for v in arr)
            else:
                lines.append(f"VECTORS {name} double")
                for row in arr:
                    vals = list(row) + [0.0] * (3 - len(row))
                    lines.append(" ".join(f"{v:.16e}" for v in vals))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")

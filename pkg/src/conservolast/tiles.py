"""Parametric periodic microstructure tiles on a structured triangle grid.

Families:

* ``solid``          homogeneous square tile (the homogenization oracle)
* ``circular_hole``  central hole of a given radius fraction
* ``slit_lattice``   two staggered rows of horizontal slits (tortuous
                     load paths, strongly anisotropic)
* ``chevron``        zigzag stiff stripe in a soft matrix (anisotropic,
                     auxetic-capable), two-phase instead of perforated

Each tile is an n x n cell grid split into two triangles per cell, with
right/top boundary nodes paired periodically to left/bottom masters.
Perforated families drop elements by centroid and re-validate
orientation, torus connectivity, and the periodic pairing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse
import scipy.sparse.csgraph

from .errors import MeshingFailed

TILE_FAMILIES = ("solid", "circular_hole", "slit_lattice", "chevron")


@dataclass
class TileSpec:
    family: str = "solid"
    target_elements: int = 512
    period: tuple = (1.0, 1.0)
    young: float = 1.0
    poisson: float = 0.3
    hole_radius: float = 0.3          # fraction of the smaller period
    slit_length: float = 0.55         # fraction of the x period
    slit_gap: float = 0.10            # slit thickness, fraction of the y period
    chevron_angle: float = 35.0       # stripe slope, degrees
    chevron_thickness: float = 0.22   # stripe thickness, fraction of the y period
    soft_young_ratio: float = 0.02

    def __post_init__(self):
        if self.family not in TILE_FAMILIES:
            raise MeshingFailed(f"unknown tile family {self.family!r}")
        if self.target_elements < 8:
            raise MeshingFailed("target_elements must be at least 8")


@dataclass(eq=False)
class Tile:
    vertices: np.ndarray                 # (nv, 2) rest positions
    triangles: np.ndarray                # (ne, 3) int, positively oriented
    young: np.ndarray                    # (ne,)
    poisson: np.ndarray                  # (ne,)
    period: np.ndarray                   # (2,)
    periodic_pairs: list = field(default_factory=list)  # (slave, master, (ox, oy))

    @property
    def n_elements(self) -> int:
        return len(self.triangles)

    def node_classes(self) -> int:
        """Number of node equivalence classes under periodic pairing."""
        root = np.arange(len(self.vertices))
        for slave, master, _ in self.periodic_pairs:
            root[slave] = master
        changed = True
        while changed:
            new = root[root]
            changed = not np.array_equal(new, root)
            root = new
        return len(np.unique(root))


def make_tile(spec: TileSpec) -> Tile:
    n = max(2, int(round(np.sqrt(spec.target_elements / 2.0))))
    lx, ly = float(spec.period[0]), float(spec.period[1])
    xs = np.linspace(0.0, lx, n + 1)
    ys = np.linspace(0.0, ly, n + 1)
    verts = np.array([(x, y) for y in ys for x in xs])

    def nid(ix, iy):
        return iy * (n + 1) + ix

    tris = []
    for iy in range(n):
        for ix in range(n):
            v00, v10 = nid(ix, iy), nid(ix + 1, iy)
            v01, v11 = nid(ix, iy + 1), nid(ix + 1, iy + 1)
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    tris = np.array(tris, dtype=np.int64)

    pairs = [(nid(n, iy), nid(0, iy), (1, 0)) for iy in range(n)]
    pairs += [(nid(ix, n), nid(ix, 0), (0, 1)) for ix in range(n)]
    pairs.append((nid(n, n), nid(0, 0), (1, 1)))

    centroids = verts[tris].mean(axis=1)
    keep = np.ones(len(tris), dtype=bool)
    young = np.full(len(tris), spec.young)

    if spec.family == "circular_hole":
        if not (0.0 < spec.hole_radius < 0.5):
            raise MeshingFailed(f"hole radius fraction {spec.hole_radius} must be in (0, 0.5)")
        center = np.array([0.5 * lx, 0.5 * ly])
        r = spec.hole_radius * min(lx, ly)
        keep = np.linalg.norm(centroids - center, axis=1) >= r
    elif spec.family == "slit_lattice":
        if not (0.0 < spec.slit_length < 1.0):
            raise MeshingFailed(f"slit length fraction {spec.slit_length} must be in (0, 1)")
        g = max(spec.slit_gap, 1.0 / n) * ly
        half = 0.5 * spec.slit_length
        cx = centroids[:, 0] / lx
        cy = centroids[:, 1] / ly
        row_a = (np.abs(cy - 0.25) * ly < 0.5 * g) & (np.abs(cx - 0.5) < half)
        wrapped = np.minimum(cx, 1.0 - cx)
        row_b = (np.abs(cy - 0.75) * ly < 0.5 * g) & (wrapped < half)
        keep = ~(row_a | row_b)
    elif spec.family == "chevron":
        slope = np.tan(np.radians(spec.chevron_angle))
        cx = centroids[:, 0] / lx
        cy = centroids[:, 1] / ly
        zig = np.where(cx < 0.5, cx - 0.25, 0.75 - cx)   # triangle wave
        stripe = np.abs(cy - (0.5 + slope * zig)) < 0.5 * spec.chevron_thickness
        young = np.where(stripe, spec.young, spec.young * spec.soft_young_ratio)

    tris = tris[keep]
    young = young[keep]
    if len(tris) == 0:
        raise MeshingFailed("all elements removed")

    used = np.zeros(len(verts), dtype=bool)
    used[tris.ravel()] = True
    renum = -np.ones(len(verts), dtype=np.int64)
    renum[used] = np.arange(used.sum())
    new_pairs = []
    for slave, master, off in pairs:
        if used[slave] and used[master]:
            new_pairs.append((int(renum[slave]), int(renum[master]), off))
        elif used[slave] != used[master]:
            raise MeshingFailed("periodic boundary broken by element removal")
    tile = Tile(vertices=verts[used], triangles=renum[tris],
                young=young, poisson=np.full(len(tris), spec.poisson),
                period=np.array([lx, ly]), periodic_pairs=new_pairs)
    validate_tile(tile)
    return tile


def validate_tile(tile: Tile):
    """Orientation, periodic-pair consistency, and torus connectivity."""
    v, t = tile.vertices, tile.triangles
    e1 = v[t[:, 1]] - v[t[:, 0]]
    e2 = v[t[:, 2]] - v[t[:, 0]]
    area2 = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    if np.any(area2 <= 0.0):
        raise MeshingFailed("mesh contains non-positively-oriented triangles")

    scale = float(np.linalg.norm(tile.period))
    for slave, master, off in tile.periodic_pairs:
        expect = v[master] + np.asarray(off, dtype=float) * tile.period
        if np.linalg.norm(v[slave] - expect) > 1e-9 * scale:
            raise MeshingFailed(f"inconsistent periodic pair {slave} -> {master}")

    root = np.arange(len(v))
    for slave, master, _ in tile.periodic_pairs:
        root[slave] = master
    for _ in range(len(v)):
        new = root[root]
        if np.array_equal(new, root):
            break
        root = new
    rows, cols = [], []
    for a, b in ((0, 1), (1, 2), (2, 0)):
        rows.extend(root[t[:, a]])
        cols.extend(root[t[:, b]])
    adj = scipy.sparse.coo_matrix((np.ones(len(rows)), (rows, cols)),
                                  shape=(len(v), len(v)))
    n_comp, labels = scipy.sparse.csgraph.connected_components(adj, directed=False)
    active = np.unique(root[t.ravel()])
    if len(np.unique(labels[active])) != 1:
        raise MeshingFailed("mesh is disconnected on the periodic torus")

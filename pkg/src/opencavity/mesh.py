"""Structured triangulations of rectilinear domains with tagged boundaries.

Meshes live on a global lattice of spacing ``1/n_per_unit``.  Every lattice
square inside the domain is split along the lower-left to upper-right
diagonal, so two meshes built with the same ``n_per_unit`` coincide wherever
their domains overlap.  This is what makes the restriction of an
extended-domain solution to the cavity exact (see :func:`extract_submesh`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

GAMMA_I = "Gamma_i"
GAMMA_W = "Gamma_w"
GAMMA_O = "Gamma_o"
GAMMA_D = "Gamma_d"
GAMMA_N = "Gamma_n"

VELOCITY_TAGS = (GAMMA_I, GAMMA_W, GAMMA_O)
TEMPERATURE_TAGS = (GAMMA_D, GAMMA_N, GAMMA_O)

_LATTICE_TOL = 1e-9


@dataclass(frozen=True)
class Rect:
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError(f"rectangle {self} has non-positive area")

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)


@dataclass(frozen=True)
class RectUnion:
    """Union of axis-aligned rectangles with pairwise disjoint interiors."""

    rects: tuple[Rect, ...]

    def __init__(self, rects: Iterable[Rect | Sequence[float]]):
        rs = tuple(r if isinstance(r, Rect) else Rect(*r) for r in rects)
        if not rs:
            raise ValueError("RectUnion needs at least one rectangle")
        for a in range(len(rs)):
            for b in range(a + 1, len(rs)):
                ra, rb = rs[a], rs[b]
                ox = min(ra.x_max, rb.x_max) - max(ra.x_min, rb.x_min)
                oy = min(ra.y_max, rb.y_max) - max(ra.y_min, rb.y_min)
                if ox > 0 and oy > 0:
                    raise ValueError(f"rectangles {ra} and {rb} overlap")
        object.__setattr__(self, "rects", rs)

    @property
    def area(self) -> float:
        return sum(r.area for r in self.rects)

    def corners(self) -> list[tuple[float, float]]:
        return [(x, y) for r in self.rects for x in (r.x_min, r.x_max) for y in (r.y_min, r.y_max)]


CAVITY = RectUnion([(0.0, 1.0, 0.0, 1.0)])
CAVITY_EXTENDED = RectUnion([(0.0, 1.0, 0.0, 1.0), (1.0, 2.0, -1.0, 2.0)])


def _to_lattice(value: float, n: int) -> int:
    scaled = value * n
    k = round(scaled)
    if abs(scaled - k) > _LATTICE_TOL:
        raise ValueError(f"coordinate {value!r} is not on the lattice of spacing 1/{n}")
    return int(k)


@dataclass(frozen=True, eq=False)
class TaggedMesh:
    """Conforming triangulation with P2 node layout and boundary tags.

    P2 nodes are numbered vertices first, then one midpoint per edge
    (node ``n_vertices + e`` sits on edge ``e``).

    Attributes
    ----------
    vertices : (V, 2) float array
    lattice : (V, 2) int array
        Integer lattice coordinates, ``vertices == lattice / n_per_unit``.
    triangles : (T, 3) int array, counterclockwise.
    edges : (E, 2) int array, vertex pairs sorted ascending.
    triangle_edges : (T, 3) int array
        Edge ids of local edges (0,1), (1,2), (2,0).
    boundary_edges : (B,) int array of edge ids.
    boundary_orientation : (B, 2) int array
        Boundary edge endpoints ordered so the domain lies on the left.
    tags : dict
        Tag name to array of boundary edge ids.  Empty until
        :func:`tag_boundaries` is applied.
    """

    n_per_unit: int
    vertices: np.ndarray
    lattice: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    triangle_edges: np.ndarray
    boundary_edges: np.ndarray
    boundary_orientation: np.ndarray
    tags: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("vertices", "lattice", "triangles", "edges", "triangle_edges",
                     "boundary_edges", "boundary_orientation"):
            getattr(self, name).setflags(write=False)
        for arr in self.tags.values():
            arr.setflags(write=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_p2_nodes(self) -> int:
        return self.n_vertices + self.n_edges

    @property
    def p2_nodes(self) -> np.ndarray:
        """Midpoint node id for each edge."""
        return self.n_vertices + np.arange(self.n_edges)

    @property
    def p2_coordinates(self) -> np.ndarray:
        mid = 0.5 * (self.vertices[self.edges[:, 0]] + self.vertices[self.edges[:, 1]])
        return np.vstack([self.vertices, mid])

    @property
    def p2_lattice2(self) -> np.ndarray:
        """P2 node coordinates on the half-spacing lattice (integers)."""
        mid = self.lattice[self.edges[:, 0]] + self.lattice[self.edges[:, 1]]
        return np.vstack([2 * self.lattice, mid])

    @property
    def p2_cells(self) -> np.ndarray:
        """(T, 6) P2 node ids: three vertices then midpoints of edges 01, 12, 20."""
        return np.hstack([self.triangles, self.n_vertices + self.triangle_edges])

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def edge_midpoints(self, edge_ids) -> np.ndarray:
        e = self.edges[np.asarray(edge_ids)]
        return 0.5 * (self.vertices[e[:, 0]] + self.vertices[e[:, 1]])

    def boundary_nodes(self, tag: str) -> np.ndarray:
        """Sorted P2 node ids on the closure of the edges carrying ``tag``."""
        ids = self.tags.get(tag, np.empty(0, dtype=int))
        if len(ids) == 0:
            return np.empty(0, dtype=int)
        e = self.edges[ids]
        return np.unique(np.concatenate([e[:, 0], e[:, 1], self.n_vertices + ids]))

    def oriented_edges(self, tag: str):
        """Node triples ``(start, end, midpoint)`` and outward unit normals for a tag."""
        ids = self.tags.get(tag, np.empty(0, dtype=int))
        pos = np.searchsorted(self.boundary_edges, ids)
        ends = self.boundary_orientation[pos]
        nodes = np.column_stack([ends, self.n_vertices + ids])
        d = self.vertices[ends[:, 1]] - self.vertices[ends[:, 0]]
        length = np.hypot(d[:, 0], d[:, 1])
        normal = np.column_stack([d[:, 1], -d[:, 0]]) / length[:, None]
        return nodes, normal, length


def build_structured_mesh(domain: RectUnion, n_per_unit: int) -> TaggedMesh:
    """Uniform right-triangle mesh of ``domain`` with spacing ``1/n_per_unit``."""
    if int(n_per_unit) != n_per_unit or n_per_unit < 1:
        raise ValueError(f"n_per_unit must be a positive integer, got {n_per_unit!r}")
    n = int(n_per_unit)
    cells = set()
    for r in domain.rects:
        i0, i1 = _to_lattice(r.x_min, n), _to_lattice(r.x_max, n)
        j0, j1 = _to_lattice(r.y_min, n), _to_lattice(r.y_max, n)
        for j in range(j0, j1):
            for i in range(i0, i1):
                cells.add((j, i))
    cells = np.array(sorted(cells), dtype=np.int64)[:, ::-1]  # (i, j), row-major in j

    corners = np.concatenate([cells, cells + [1, 0], cells + [1, 1], cells + [0, 1]])
    lattice, inverse = np.unique(corners[:, ::-1], axis=0, return_inverse=True)
    lattice = lattice[:, ::-1].copy()
    inverse = inverse.reshape(4, -1)
    a, b, c, d = inverse
    triangles = np.empty((2 * len(cells), 3), dtype=np.int64)
    triangles[0::2] = np.column_stack([a, b, c])
    triangles[1::2] = np.column_stack([a, c, d])

    local = triangles[:, [[0, 1], [1, 2], [2, 0]]]  # (T, 3, 2)
    pairs = np.sort(local.reshape(-1, 2), axis=1)
    edges, edge_inv, counts = np.unique(pairs, axis=0, return_inverse=True, return_counts=True)
    triangle_edges = edge_inv.reshape(-1, 3)

    boundary = np.flatnonzero(counts == 1)
    # Orientation of a boundary edge follows its (only) triangle's CCW order.
    flat_local = local.reshape(-1, 2)
    is_bnd = counts[edge_inv] == 1
    bnd_slots = np.flatnonzero(is_bnd)
    order = np.argsort(edge_inv[bnd_slots])
    orientation = flat_local[bnd_slots[order]]

    return TaggedMesh(
        n_per_unit=n,
        vertices=lattice / float(n),
        lattice=lattice,
        triangles=triangles,
        edges=edges,
        triangle_edges=triangle_edges,
        boundary_edges=boundary,
        boundary_orientation=orientation,
    )


TagRule = tuple[Callable[[float, float], bool], str]


def tag_boundaries(mesh: TaggedMesh, rules: Sequence[TagRule]) -> TaggedMesh:
    """Assign boundary tags by evaluating predicates at edge midpoints.

    Every boundary edge must end up with exactly one velocity tag
    (``Gamma_i``, ``Gamma_w``, ``Gamma_o``) and exactly one temperature tag
    (``Gamma_d``, ``Gamma_n``, ``Gamma_o``); ``Gamma_o`` counts for both.
    """
    known = set(VELOCITY_TAGS) | set(TEMPERATURE_TAGS)
    mids = mesh.edge_midpoints(mesh.boundary_edges)
    hits: dict[str, list[int]] = {}
    for pred, tag in rules:
        if tag not in known:
            raise ValueError(f"unknown boundary tag {tag!r}")
        for e, (x, y) in zip(mesh.boundary_edges, mids):
            if pred(float(x), float(y)):
                hits.setdefault(tag, []).append(int(e))
    tag_sets = {t: set(v) for t, v in hits.items()}
    for e, (x, y) in zip(mesh.boundary_edges, mids):
        vel = [t for t in VELOCITY_TAGS if e in tag_sets.get(t, ())]
        tem = [t for t in TEMPERATURE_TAGS if e in tag_sets.get(t, ())]
        if not vel or not tem:
            missing = "velocity" if not vel else "temperature"
            raise ValueError(f"boundary edge at midpoint ({x:.6g}, {y:.6g}) has no {missing} tag")
        if len(vel) > 1 or len(tem) > 1:
            raise ValueError(f"boundary edge at midpoint ({x:.6g}, {y:.6g}) has conflicting tags {vel + tem}")
    tags = {t: np.array(sorted(s), dtype=np.int64) for t, s in tag_sets.items()}
    return TaggedMesh(
        n_per_unit=mesh.n_per_unit,
        vertices=mesh.vertices,
        lattice=mesh.lattice,
        triangles=mesh.triangles,
        edges=mesh.edges,
        triangle_edges=mesh.triangle_edges,
        boundary_edges=mesh.boundary_edges,
        boundary_orientation=mesh.boundary_orientation,
        tags=tags,
    )


def _near(a: float, b: float) -> bool:
    return abs(a - b) < 1e-9


def cavity_rules() -> list[TagRule]:
    """Boundary layout of the open cavity (0,1)^2 with the open side at x1 = 1."""
    return [
        (lambda x, y: _near(x, 1.0), GAMMA_O),
        (lambda x, y: not _near(x, 1.0), GAMMA_W),
        (lambda x, y: _near(x, 0.0), GAMMA_D),
        (lambda x, y: _near(y, 0.0) or _near(y, 1.0), GAMMA_N),
    ]


def extended_cavity_rules() -> list[TagRule]:
    """Boundary layout of the cavity extended by the box (1,2) x (-1,2)."""
    return [
        (lambda x, y: _near(x, 2.0), GAMMA_O),
        (lambda x, y: not _near(x, 2.0), GAMMA_W),
        (lambda x, y: _near(x, 0.0) and 0.0 < y < 1.0, GAMMA_D),
        (lambda x, y: not _near(x, 2.0) and not (_near(x, 0.0) and 0.0 < y < 1.0), GAMMA_N),
    ]


def cavity_mesh(n_per_unit: int) -> TaggedMesh:
    return tag_boundaries(build_structured_mesh(CAVITY, n_per_unit), cavity_rules())


def extended_cavity_mesh(n_per_unit: int) -> TaggedMesh:
    return tag_boundaries(build_structured_mesh(CAVITY_EXTENDED, n_per_unit), extended_cavity_rules())


@dataclass(frozen=True)
class NodeMap:
    """Map from P2 node ids of a sub-mesh to P2 node ids of the parent mesh."""

    pairs: np.ndarray
    n_vertices: int  # sub-mesh vertices come first in ``pairs``

    def __post_init__(self):
        self.pairs.setflags(write=False)

    def __len__(self):
        return len(self.pairs)

    @property
    def vertex_pairs(self) -> np.ndarray:
        """Parent node ids of the sub-mesh vertices (also parent vertex ids)."""
        return self.pairs[: self.n_vertices]


def extract_submesh(mesh_ext: TaggedMesh, region: RectUnion) -> tuple[TaggedMesh, NodeMap]:
    """Mesh ``region`` on the lattice of ``mesh_ext`` and map its nodes into it.

    The returned mesh is exactly ``build_structured_mesh(region, n)``
    (untagged); the map sends each of its P2 nodes to the coincident P2 node
    of ``mesh_ext``.
    """
    n = mesh_ext.n_per_unit
    sub = build_structured_mesh(region, n)  # raises on misaligned corners

    parent_index = {tuple(k): i for i, k in enumerate(mesh_ext.p2_lattice2.tolist())}
    try:
        pairs = np.array([parent_index[tuple(k)] for k in sub.p2_lattice2.tolist()], dtype=np.int64)
    except KeyError as err:
        raise ValueError(f"region is not covered by the parent mesh (node {err.args[0]} missing)") from None

    parent_tris = {tuple(sorted(t)) for t in mesh_ext.triangles.tolist()}
    mapped = np.sort(pairs[sub.triangles], axis=1)
    for t in mapped.tolist():
        if tuple(t) not in parent_tris:
            raise ValueError("region cells do not coincide with parent mesh cells")
    return sub, NodeMap(pairs, sub.n_vertices)

"""Taylor-Hood degree-of-freedom numbering and strong Dirichlet data.

Global layout of the coupled flow unknowns::

    [ v_x (P2 nodes) | v_y (P2 nodes) | p (vertices) ]

Temperature uses the scalar P2 numbering on its own.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Union

import numpy as np

from .mesh import GAMMA_D, GAMMA_I, GAMMA_W, TaggedMesh

Value = Union[float, tuple, Callable]


@dataclass(frozen=True, eq=False)
class DofMap:
    n_scalar: int         # P2 nodes per scalar field
    n_pressure: int       # P1 nodes (vertices)
    p2_cells: np.ndarray  # (T, 6)
    p1_cells: np.ndarray  # (T, 3)

    @property
    def n_velocity(self) -> int:
        return 2 * self.n_scalar

    @property
    def n_temperature(self) -> int:
        return self.n_scalar

    @property
    def n_flow(self) -> int:
        """Size of the coupled velocity-pressure system."""
        return self.n_velocity + self.n_pressure

    def velocity_cells(self) -> np.ndarray:
        """(T, 12) velocity dof ids: x components then y components."""
        return np.hstack([self.p2_cells, self.p2_cells + self.n_scalar])

    def same_layout(self, other: "DofMap") -> bool:
        return (self.n_scalar == other.n_scalar and self.n_pressure == other.n_pressure
                and np.array_equal(self.p2_cells, other.p2_cells))


def build_dofmap(mesh: TaggedMesh) -> DofMap:
    p2 = mesh.p2_cells.copy()
    p1 = mesh.triangles.copy()
    p2.setflags(write=False)
    p1.setflags(write=False)
    return DofMap(n_scalar=mesh.n_p2_nodes, n_pressure=mesh.n_vertices, p2_cells=p2, p1_cells=p1)


@dataclass(frozen=True, eq=False)
class DirichletSet:
    ids: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        ids = np.asarray(self.ids, dtype=np.int64)
        vals = np.asarray(self.values, dtype=float)
        if ids.shape != vals.shape:
            raise ValueError("Dirichlet ids and values differ in shape")
        if len(np.unique(ids)) != len(ids):
            raise ValueError("Dirichlet set lists a dof more than once")
        if not np.all(np.isfinite(vals)):
            raise ValueError("Dirichlet values must be finite")
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return len(self.ids)

    def shifted(self, offset: int) -> "DirichletSet":
        return DirichletSet(self.ids + offset, self.values)

    @staticmethod
    def merge(*sets: "DirichletSet") -> "DirichletSet":
        if not sets:
            return DirichletSet(np.empty(0, dtype=np.int64), np.empty(0))
        return DirichletSet(np.concatenate([s.ids for s in sets]), np.concatenate([s.values for s in sets]))


@dataclass(frozen=True)
class BoundaryData:
    """Prescribed boundary values per tag.

    Values are constants or vectorised callables ``f(x, y, t)``; velocity
    values are pairs (or callables returning a pair of arrays).
    ``pressure_pin`` optionally fixes the pressure at one vertex, which is
    needed when no open boundary determines the pressure level.
    """

    velocity: Mapping[str, Value] = field(default_factory=lambda: {GAMMA_W: (0.0, 0.0)})
    temperature: Mapping[str, Value] = field(default_factory=lambda: {GAMMA_D: 1.0})
    pressure_pin: Optional[tuple] = None  # ((x, y), value or f(x, y, t))


def _evaluate(value, x, y, t, ncomp):
    if callable(value):
        out = value(x, y, t)
    else:
        out = value
    if ncomp == 1:
        return np.broadcast_to(np.asarray(out, dtype=float), x.shape).astype(float)
    comps = [np.broadcast_to(np.asarray(c, dtype=float), x.shape).astype(float) for c in out]
    if len(comps) != ncomp:
        raise ValueError(f"velocity boundary value must have {ncomp} components")
    return comps


def _collect(mesh, data, ncomp, t, required):
    coords = mesh.p2_coordinates
    ids, vals = [], []
    for tag in required:
        if len(mesh.tags.get(tag, ())) and tag not in data:
            raise ValueError(f"no boundary values given for tagged region {tag}")
    for tag, value in data.items():
        nodes = mesh.boundary_nodes(tag)
        if len(nodes) == 0:
            continue
        x, y = coords[nodes, 0], coords[nodes, 1]
        ev = _evaluate(value, x, y, t, ncomp)
        ids.append(nodes)
        vals.append(np.column_stack(ev) if ncomp > 1 else ev[:, None])
    if not ids:
        return np.empty(0, dtype=np.int64), np.empty((0, ncomp))
    ids = np.concatenate(ids)
    vals = np.vstack(vals)
    order = np.argsort(ids, kind="stable")
    ids, vals = ids[order], vals[order]
    uniq, first = np.unique(ids, return_index=True)
    # Nodes on the closure of two Dirichlet parts must agree.
    ref = np.repeat(vals[first], np.diff(np.append(first, len(ids))), axis=0)
    bad = np.flatnonzero(np.abs(vals - ref).max(axis=1) > 1e-12)
    if len(bad):
        node = ids[bad[0]]
        raise ValueError(f"conflicting Dirichlet values at node {node} ({coords[node, 0]:.6g}, {coords[node, 1]:.6g})")
    return uniq, vals[first]


def dirichlet_sets(mesh: TaggedMesh, data: BoundaryData, t: float = 0.0):
    """Velocity and temperature Dirichlet sets at time ``t``.

    All P2 nodes on the closure of a Dirichlet-tagged edge are constrained,
    so corners shared with the open boundary belong to the Dirichlet part.
    Velocity ids use the flow numbering (x block, then y block).
    """
    n = mesh.n_p2_nodes
    vel_data = {k: v for k, v in data.velocity.items() if k in (GAMMA_I, GAMMA_W)}
    if len(vel_data) != len(data.velocity):
        raise ValueError("velocity Dirichlet data may only be given on Gamma_i and Gamma_w")
    if set(data.temperature) - {GAMMA_D}:
        raise ValueError("temperature Dirichlet data may only be given on Gamma_d")
    nodes, vals = _collect(mesh, vel_data, 2, t, (GAMMA_I, GAMMA_W))
    vel = DirichletSet(np.concatenate([nodes, nodes + n]), np.concatenate([vals[:, 0], vals[:, 1]]))
    nodes, vals = _collect(mesh, dict(data.temperature), 1, t, (GAMMA_D,))
    temp = DirichletSet(nodes, vals[:, 0])
    return vel, temp


def pressure_pin_set(mesh: TaggedMesh, data: BoundaryData, t: float = 0.0) -> DirichletSet:
    """Pinned pressure dof (pressure numbering) or an empty set."""
    if data.pressure_pin is None:
        return DirichletSet(np.empty(0, dtype=np.int64), np.empty(0))
    (px, py), value = data.pressure_pin
    d = np.hypot(mesh.vertices[:, 0] - px, mesh.vertices[:, 1] - py)
    vid = int(np.argmin(d))
    if d[vid] > 1e-9:
        raise ValueError(f"pressure pin point ({px}, {py}) is not a mesh vertex")
    x, y = mesh.vertices[vid:vid + 1, 0], mesh.vertices[vid:vid + 1, 1]
    return DirichletSet(np.array([vid]), _evaluate(value, x, y, t, 1))

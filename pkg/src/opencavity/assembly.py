"""Finite element assembly of the linearised Crank-Nicolson step systems.

Per step two systems are assembled, temperature first::

    (2/k) M u' + N(v~) u' + K u'/(Re Pr) - H(v~) u'
        = (2/k) M u - N(v) u - K u/(Re Pr) + H(v) u + f(t') + f(t)

    (2/k) M v' + N(v~) v' + K v'/Re - G(v~) v' - B^T p'
        = (2/k) M v - N(v) v - K v/Re + G(v) v + B^T p
          + Gr/Re^2 M (u' + u) e + g(t') + g(t)
    B v' = 0

where primes are the new time level, ``v~ = 2 v^n - v^(n-1)``,
``N(w)`` is convection by ``w``, ``G`` the directional do-nothing boundary
matrix (zero for plain do-nothing) and ``H`` the heat-transfer boundary
matrix (zero for the Neumann condition).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from . import fem
from .boundary_conditions import DDN, BcCombo, BetaSpec, negative_part
from .linalg import canonical, from_triplets, nested_dissection
from .mesh import GAMMA_O, TaggedMesh
from .spaces import BoundaryData, DirichletSet, build_dofmap, dirichlet_sets, pressure_pin_set

SEMIDISCRETE = "semidiscrete"
LITERAL = "paper-literal"
WEAK_FORMS = (SEMIDISCRETE, LITERAL)
BUOYANCY_MODES = ("trapezoid", "implicit")


@dataclass(frozen=True)
class Params:
    re: float
    pr: float
    gr: float
    k: float
    e: tuple = (0.0, 1.0)

    def __post_init__(self):
        if not self.re > 0:
            raise ValueError(f"Reynolds number must be positive, got {self.re}")
        if not self.pr > 0:
            raise ValueError(f"Prandtl number must be positive, got {self.pr}")
        if not self.gr >= 0:
            raise ValueError(f"Grashof number must be non-negative, got {self.gr}")
        if not self.k > 0:
            raise ValueError(f"time step must be positive, got {self.k}")
        if tuple(self.e) != (0.0, 1.0):
            raise ValueError("buoyancy direction is fixed to (0, 1) in 2D")

    @property
    def buoyancy(self) -> float:
        return self.gr / self.re ** 2


@dataclass(frozen=True)
class SchemeOptions:
    """Switches for the discrete scheme.

    weak_form
        ``semidiscrete`` (default) treats explicit convection and pressure at
        the old time level; ``paper-literal`` is the alternative momentum
        weak form that doubles the implicit convection and pressure terms
        and drops their explicit counterparts.
    buoyancy
        ``trapezoid`` uses ``u^(n+1) + u^n``; ``implicit`` uses ``2 u^(n+1)``.
    convection
        Turn the advection terms off (Stokes / pure conduction checks).
    deterministic
        Kept for configuration files.  Assembly is a sequential triplet
        reduction, so results are bitwise reproducible either way.
    """

    weak_form: str = SEMIDISCRETE
    buoyancy: str = "trapezoid"
    convection: bool = True
    deterministic: bool = True

    def __post_init__(self):
        if self.weak_form not in WEAK_FORMS:
            raise ValueError(f"weak_form must be one of {WEAK_FORMS}, got {self.weak_form!r}")
        if self.buoyancy not in BUOYANCY_MODES:
            raise ValueError(f"buoyancy must be one of {BUOYANCY_MODES}, got {self.buoyancy!r}")


@dataclass(frozen=True)
class Forcing:
    """Volume sources ``g1(x, y, t) -> (gx, gy)`` and ``g2(x, y, t)``."""

    momentum: Optional[Callable] = None
    heat: Optional[Callable] = None


@dataclass
class State:
    v: np.ndarray
    p: np.ndarray
    u: np.ndarray
    t: float = 0.0

    def copy(self) -> "State":
        return State(self.v.copy(), self.p.copy(), self.u.copy(), self.t)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.v)) and np.all(np.isfinite(self.p)) and np.all(np.isfinite(self.u)))


@dataclass
class SparseSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    layout: dict = field(default_factory=dict)
    ordering: Optional[np.ndarray] = None  # fill-reducing symmetric permutation

    def __post_init__(self):
        if self.matrix.shape[0] != self.matrix.shape[1] or self.matrix.shape[0] != len(self.rhs):
            raise ValueError(f"matrix {self.matrix.shape} does not match rhs of length {len(self.rhs)}")


def extrapolate(state_n: State, state_nm1: State):
    """Linear extrapolation ``2 x^n - x^(n-1)`` of velocity and temperature."""
    if state_n.v.shape != state_nm1.v.shape or state_n.u.shape != state_nm1.u.shape:
        raise ValueError("states have different layouts")
    return 2.0 * state_n.v - state_nm1.v, 2.0 * state_n.u - state_nm1.u


def apply_dirichlet(system: SparseSystem, constraints: DirichletSet) -> SparseSystem:
    """Strong constraints by symmetric row/column elimination with lifting."""
    n = system.matrix.shape[0]
    ids = constraints.ids
    if len(ids) == 0:
        return system
    if ids.min() < 0 or ids.max() >= n:
        bad = ids[(ids < 0) | (ids >= n)][0]
        raise IndexError(f"constrained dof {bad} out of range for a system of size {n}")
    a = canonical(system.matrix).copy()
    g = np.zeros(n)
    g[ids] = constraints.values
    rhs = system.rhs - a @ g
    rhs[ids] = constraints.values
    keep = np.ones(n, dtype=bool)
    keep[ids] = False
    rows = np.repeat(np.arange(n), np.diff(a.indptr))
    a.data = a.data * (keep[rows] & keep[a.indices])
    ident = sp.csr_matrix(((~keep).astype(float), np.arange(n), np.arange(n + 1)), shape=(n, n))
    a = a + ident
    a.eliminate_zeros()
    return SparseSystem(canonical(a), rhs, system.layout, system.ordering)


class _Pattern:
    """Fixed CSR sparsity of a scalar P2 operator, with a scatter map."""

    def __init__(self, cells: np.ndarray, n: int):
        ncell, nloc = cells.shape
        rows = np.repeat(cells, nloc, axis=1).ravel()
        cols = np.tile(cells, (1, nloc)).ravel()
        keys = rows * n + cols
        uniq, self.slot = np.unique(keys, return_inverse=True)
        self.indices = (uniq % n).astype(np.int32)
        counts = np.bincount(uniq // n, minlength=n)
        self.indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int32)
        self.n = n
        self.nnz = len(uniq)

    def matrix(self, local: np.ndarray) -> sp.csr_matrix:
        data = np.bincount(self.slot, weights=local.ravel(), minlength=self.nnz)
        return sp.csr_matrix((data, self.indices.copy(), self.indptr.copy()), shape=(self.n, self.n))


class Discretization:
    """Mesh, dof map, boundary data and cached element quantities.

    Constant operators (mass ``M``, stiffness ``K``, divergence ``Bx, By``)
    are assembled once; velocity-dependent ones on demand.
    """

    def __init__(self, mesh: TaggedMesh, boundary: BoundaryData | None = None,
                 quad_degree: int = 5, edge_degree: int = 7):
        self.mesh = mesh
        self.dofmap = build_dofmap(mesh)
        self.boundary = boundary if boundary is not None else BoundaryData()
        self.n = self.dofmap.n_scalar
        self.np = self.dofmap.n_pressure
        cells = self.dofmap.p2_cells
        self.cells = cells
        self._dirichlet_cache = None

        geo = fem.ElementGeometry.from_coordinates(mesh.vertices[mesh.triangles])
        rule = fem.triangle_quadrature(quad_degree)
        self.geometry = geo
        self.qpoints = geo.physical_points(rule.points)            # (T, nq, 2)
        self.phi = fem.basis_values(fem.P2, rule.points)            # (nq, 6)
        self.psi = fem.basis_values(fem.P1, rule.points)            # (nq, 3)
        ref_grad = fem.basis_gradients(fem.P2, rule.points)         # (nq, 6, 2)
        self.grad = np.einsum("tij,qkj->tqki", geo.inv_jac_t, ref_grad)  # (T, nq, 6, 2)
        self.wdet = geo.det[:, None] * rule.weights[None, :]         # (T, nq)

        self._pattern = _Pattern(cells, self.n)
        self.mass = self._pattern.matrix(np.einsum("tq,qi,qj->tij", self.wdet, self.phi, self.phi))
        self.stiffness = self._pattern.matrix(np.einsum("tq,tqid,tqjd->tij", self.wdet, self.grad, self.grad))
        self.div_x, self.div_y = self._divergence()

        erule = fem.edge_quadrature(edge_degree)
        self.edge_weights = erule.weights
        self.edge_phi = fem.edge_p2_values(erule.points)            # (nqe, 3)
        nodes, normal, length = mesh.oriented_edges(GAMMA_O)
        self.open_nodes, self.open_normal, self.open_length = nodes, normal, length

    @cached_property
    def temperature_ordering(self) -> np.ndarray:
        return nested_dissection(self.mesh.p2_lattice2)

    @cached_property
    def flow_ordering(self) -> np.ndarray:
        lat = self.mesh.p2_lattice2
        coords = np.vstack([lat, lat, 2 * self.mesh.lattice])
        priority = np.r_[np.zeros(2 * self.n), np.ones(self.np)]
        return nested_dissection(coords, priority=priority)

    # ---------------------------------------------------------------- fields

    def at_qp(self, nodal: np.ndarray) -> np.ndarray:
        """Values of a scalar P2 field at all quadrature points, (T, nq)."""
        return np.einsum("qk,tk->tq", self.phi, nodal[self.cells])

    def interpolate_scalar(self, f, t: float = 0.0) -> np.ndarray:
        xy = self.mesh.p2_coordinates
        return np.broadcast_to(np.asarray(f(xy[:, 0], xy[:, 1], t), dtype=float), (self.n,)).copy()

    def interpolate_velocity(self, f, t: float = 0.0) -> np.ndarray:
        xy = self.mesh.p2_coordinates
        fx, fy = f(xy[:, 0], xy[:, 1], t)
        return np.concatenate([np.broadcast_to(fx, (self.n,)), np.broadcast_to(fy, (self.n,))]).astype(float)

    def interpolate_pressure(self, f, t: float = 0.0) -> np.ndarray:
        xy = self.mesh.vertices
        return np.broadcast_to(np.asarray(f(xy[:, 0], xy[:, 1], t), dtype=float), (self.np,)).copy()

    @cached_property
    def _steady_boundary(self) -> bool:
        b = self.boundary
        values = list(b.velocity.values()) + list(b.temperature.values())
        if b.pressure_pin is not None:
            values.append(b.pressure_pin[1])
        return not any(callable(v) for v in values)

    def dirichlet(self, t: float = 0.0):
        """(velocity, temperature, pressure-pin) Dirichlet sets at time ``t``."""
        if self._steady_boundary and self._dirichlet_cache is not None:
            return self._dirichlet_cache
        vel, temp = dirichlet_sets(self.mesh, self.boundary, t)
        out = (vel, temp, pressure_pin_set(self.mesh, self.boundary, t))
        if self._steady_boundary:
            self._dirichlet_cache = out
        return out

    # ------------------------------------------------------------- operators

    def _divergence(self):
        pcells = self.dofmap.p1_cells
        rows = np.repeat(pcells[:, :, None], 6, axis=2)
        cols = np.repeat(self.cells[:, None, :], 3, axis=1)
        out = []
        for d in range(2):
            local = np.einsum("tq,qm,tqj->tmj", self.wdet, self.psi, self.grad[..., d])
            out.append(from_triplets(self.np, self.n, rows, cols, local))
        return out

    def convection(self, w: np.ndarray) -> sp.csr_matrix:
        """Matrix of ``(w . grad phi_j, phi_i)`` for a P2 velocity ``w``."""
        wx = self.at_qp(w[: self.n])
        wy = self.at_qp(w[self.n:])
        adv = wx[..., None] * self.grad[..., 0] + wy[..., None] * self.grad[..., 1]
        return self._pattern.matrix(np.einsum("tq,qi,tqj->tij", self.wdet, self.phi, adv))

    def _open_matrix(self, coeff_of_normal_velocity, w: np.ndarray) -> sp.csr_matrix:
        nodes = self.open_nodes
        if len(nodes) == 0:
            return sp.csr_matrix((self.n, self.n))
        wx = self.edge_phi @ w[: self.n][nodes].T   # (nqe, Eo)
        wy = self.edge_phi @ w[self.n:][nodes].T
        s = wx * self.open_normal[:, 0] + wy * self.open_normal[:, 1]
        c = coeff_of_normal_velocity(s) * self.edge_weights[:, None] * self.open_length[None, :]
        local = np.einsum("qe,qi,qj->eij", c, self.edge_phi, self.edge_phi)
        rows = np.repeat(nodes[:, :, None], 3, axis=2)
        cols = np.repeat(nodes[:, None, :], 3, axis=1)
        return from_triplets(self.n, self.n, rows, cols, local)

    def open_velocity_term(self, w: np.ndarray) -> sp.csr_matrix:
        """``G[i, j] = int_Go 1/2 phi_i phi_j (w.n)_-``: bilinear part of the DDN term."""
        return self._open_matrix(lambda s: 0.5 * negative_part(s), w)

    def open_heat_term(self, w: np.ndarray, beta: BetaSpec) -> sp.csr_matrix:
        """``H[i, j] = int_Go phi_i phi_j beta(w.n) (w.n)``."""
        return self._open_matrix(lambda s: beta(s) * s, w)

    def load(self, f, t: float) -> np.ndarray:
        """``(f, phi_i)`` for a scalar source ``f(x, y, t)``."""
        x, y = self.qpoints[..., 0], self.qpoints[..., 1]
        fq = np.broadcast_to(np.asarray(f(x, y, t), dtype=float), x.shape)
        local = np.einsum("tq,qi->ti", self.wdet * fq, self.phi)
        return np.bincount(self.cells.ravel(), weights=local.ravel(), minlength=self.n)

    def load_vector(self, g, t: float) -> np.ndarray:
        """Load for a vector source ``g(x, y, t) -> (gx, gy)`` in flow velocity layout."""
        x, y = self.qpoints[..., 0], self.qpoints[..., 1]
        gx, gy = g(x, y, t)
        return np.concatenate([self.load(lambda *_: gx, t), self.load(lambda *_: gy, t)])


def _flow_matrix(block: sp.csr_matrix, disc: Discretization, pressure_weight: float = 1.0) -> sp.csr_matrix:
    bx, by = disc.div_x, disc.div_y
    return sp.bmat([[block, None, -pressure_weight * bx.T],
                    [None, block, -pressure_weight * by.T],
                    [bx, by, None]], format="csr")


def _flow_layout(disc):
    n = disc.n
    return {"vx": slice(0, n), "vy": slice(n, 2 * n), "p": slice(2 * n, 2 * n + disc.np)}


def assemble_temperature(state_n: State, v_tilde: np.ndarray, params: Params, bc: BcCombo,
                         disc: Discretization, forcing: Forcing | None = None,
                         options: SchemeOptions = SchemeOptions()) -> SparseSystem:
    """Temperature system for the step ``t -> t + k`` with constraints applied."""
    if bc.temperature != "n" and bc.beta is None:
        raise ValueError("heat-transfer condition selected without a beta specification")
    k, kappa = params.k, 1.0 / (params.re * params.pr)
    t_new = state_n.t + k
    m, kk = disc.mass, disc.stiffness
    lhs = (2.0 / k) * m + kappa * kk
    rhs = (2.0 / k) * (m @ state_n.u) - kappa * (kk @ state_n.u)
    if options.convection:
        lhs = lhs + disc.convection(v_tilde)
        rhs -= disc.convection(state_n.v) @ state_n.u
    if bc.beta is not None:
        lhs = lhs - disc.open_heat_term(v_tilde, bc.beta)
        rhs += disc.open_heat_term(state_n.v, bc.beta) @ state_n.u
    if forcing is not None and forcing.heat is not None:
        rhs += disc.load(forcing.heat, t_new) + disc.load(forcing.heat, state_n.t)
    _, temp, _ = disc.dirichlet(t_new)
    return apply_dirichlet(SparseSystem(canonical(lhs), rhs, {"u": slice(0, disc.n)}, disc.temperature_ordering), temp)


def assemble_momentum(state_n: State, v_tilde: np.ndarray, u_np1: Optional[np.ndarray], params: Params,
                      bc: BcCombo, disc: Discretization, forcing: Forcing | None = None,
                      options: SchemeOptions = SchemeOptions()) -> SparseSystem:
    """Coupled velocity-pressure system for the step ``t -> t + k``."""
    if u_np1 is None:
        raise ValueError("the new temperature must be solved before the momentum system")
    k, nu = params.k, 1.0 / params.re
    n = disc.n
    t_new = state_n.t + k
    m, kk = disc.mass, disc.stiffness
    v_old = state_n.v
    literal = options.weak_form == LITERAL

    block = (2.0 / k) * m + nu * kk
    rhs_v = np.concatenate([(2.0 / k) * (m @ v_old[:n]) - nu * (kk @ v_old[:n]),
                            (2.0 / k) * (m @ v_old[n:]) - nu * (kk @ v_old[n:])])
    if options.convection:
        block = block + (2.0 if literal else 1.0) * disc.convection(v_tilde)
        if not literal:
            c = disc.convection(v_old)
            rhs_v -= np.concatenate([c @ v_old[:n], c @ v_old[n:]])
    if bc.velocity == DDN:
        block = block - disc.open_velocity_term(v_tilde)
        g = disc.open_velocity_term(v_old)
        rhs_v += np.concatenate([g @ v_old[:n], g @ v_old[n:]])
    if not literal:
        rhs_v += np.concatenate([disc.div_x.T @ state_n.p, disc.div_y.T @ state_n.p])
    if params.gr:
        u_sum = 2.0 * u_np1 if options.buoyancy == "implicit" else u_np1 + state_n.u
        rhs_v[n:] += params.buoyancy * (m @ u_sum)
    if forcing is not None and forcing.momentum is not None:
        rhs_v += disc.load_vector(forcing.momentum, t_new) + disc.load_vector(forcing.momentum, state_n.t)

    matrix = _flow_matrix(canonical(block), disc, 2.0 if literal else 1.0)
    rhs = np.concatenate([rhs_v, np.zeros(disc.np)])
    vel, _, pin = disc.dirichlet(t_new)
    constraints = DirichletSet.merge(vel, pin.shifted(2 * n))
    return apply_dirichlet(SparseSystem(matrix, rhs, _flow_layout(disc), disc.flow_ordering), constraints)


def assemble_steady(v_lin: np.ndarray, u: Optional[np.ndarray], params: Params, bc: BcCombo,
                    disc: Discretization, forcing: Forcing | None = None, field_name: str = "flow",
                    options: SchemeOptions = SchemeOptions()) -> SparseSystem:
    """Oseen-linearised steady systems (used by the manufactured-solution checks).

    ``field_name`` selects ``"temperature"`` or ``"flow"``; ``v_lin`` is the
    linearisation velocity.
    """
    n = disc.n
    if field_name == "temperature":
        lhs = disc.stiffness / (params.re * params.pr)
        if options.convection:
            lhs = lhs + disc.convection(v_lin)
        if bc.beta is not None:
            lhs = lhs - disc.open_heat_term(v_lin, bc.beta)
        rhs = np.zeros(n)
        if forcing is not None and forcing.heat is not None:
            rhs += disc.load(forcing.heat, 0.0)
        _, temp, _ = disc.dirichlet(0.0)
        return apply_dirichlet(SparseSystem(canonical(lhs), rhs, {"u": slice(0, n)}, disc.temperature_ordering), temp)

    block = disc.stiffness / params.re
    if options.convection:
        block = block + disc.convection(v_lin)
    if bc.velocity == DDN:
        block = block - disc.open_velocity_term(v_lin)
    rhs_v = np.zeros(2 * n)
    if params.gr and u is not None:
        rhs_v[n:] += params.buoyancy * (disc.mass @ u)
    if forcing is not None and forcing.momentum is not None:
        rhs_v += disc.load_vector(forcing.momentum, 0.0)
    matrix = _flow_matrix(canonical(block), disc)
    rhs = np.concatenate([rhs_v, np.zeros(disc.np)])
    vel, _, pin = disc.dirichlet(0.0)
    return apply_dirichlet(SparseSystem(matrix, rhs, _flow_layout(disc), disc.flow_ordering),
                           DirichletSet.merge(vel, pin.shifted(2 * n)))

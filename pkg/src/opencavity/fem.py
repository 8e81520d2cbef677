"""Lagrange bases, quadrature rules and affine maps on the reference triangle.

The reference triangle has vertices (0,0), (1,0), (0,1).  P2 local ordering
is the three vertices followed by the midpoints of edges 01, 12 and 20.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

P1 = "P1"
P2 = "P2"


@dataclass(frozen=True)
class BasisEval:
    values: np.ndarray     # (nbasis,)
    gradients: np.ndarray  # (nbasis, 2), reference coordinates


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray   # (nq, 2) on the triangle, (nq,) on [0, 1]
    weights: np.ndarray  # (nq,)
    degree: int


def _check_family(family):
    if family not in (P1, P2):
        raise ValueError(f"unknown element family {family!r}")


def basis_values(family: str, points) -> np.ndarray:
    """Basis values at reference points, shape (npts, nbasis)."""
    _check_family(family)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    x, y = pts[:, 0], pts[:, 1]
    l0, l1, l2 = 1.0 - x - y, x, y
    if family == P1:
        return np.column_stack([l0, l1, l2])
    return np.column_stack([
        l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
        4 * l0 * l1, 4 * l1 * l2, 4 * l2 * l0,
    ])


def basis_gradients(family: str, points) -> np.ndarray:
    """Reference gradients at reference points, shape (npts, nbasis, 2)."""
    _check_family(family)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    npts = len(pts)
    # d(lambda_i)/d(x, y)
    dl = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    if family == P1:
        return np.broadcast_to(dl, (npts, 3, 2)).copy()
    x, y = pts[:, 0], pts[:, 1]
    lam = np.column_stack([1.0 - x - y, x, y])
    g = np.empty((npts, 6, 2))
    for i in range(3):
        g[:, i] = (4 * lam[:, i] - 1)[:, None] * dl[i]
    for k, (i, j) in enumerate(((0, 1), (1, 2), (2, 0))):
        g[:, 3 + k] = 4 * (lam[:, i, None] * dl[j] + lam[:, j, None] * dl[i])
    return g


def eval_basis(family: str, point) -> BasisEval:
    x, y = (float(c) for c in point)
    tol = 1e-12
    if x < -tol or y < -tol or x + y > 1 + tol:
        raise ValueError(f"point ({x}, {y}) lies outside the reference triangle")
    return BasisEval(basis_values(family, [[x, y]])[0], basis_gradients(family, [[x, y]])[0])


def _symmetric_rule(groups):
    """Expand (weight, a) orbit generators into a rule with area-1/2 weights."""
    pts, wts = [], []
    for w, a in groups:
        if a is None:
            pts.append((1 / 3, 1 / 3))
            wts.append(w)
            continue
        b = 1.0 - 2.0 * a
        for lam in ((a, a, b), (a, b, a), (b, a, a)):
            pts.append((lam[1], lam[2]))
            wts.append(w)
    return np.array(pts), 0.5 * np.array(wts)


_S15 = np.sqrt(15.0)

_TRIANGLE_RULES = {
    1: [(1.0, None)],
    2: [(1 / 3, 1 / 6)],
    4: [(0.223381589678011, 0.445948490915965), (0.109951743655322, 0.091576213509771)],
    5: [(9 / 40, None), ((155 - _S15) / 1200, (6 - _S15) / 21), ((155 + _S15) / 1200, (6 + _S15) / 21)],
}


@lru_cache(maxsize=None)
def triangle_quadrature(degree: int) -> QuadratureRule:
    """Cheapest tabulated symmetric rule exact for polynomials of ``degree``."""
    if int(degree) != degree or degree < 0:
        raise ValueError(f"unsupported triangle quadrature degree {degree!r}")
    for exact in sorted(_TRIANGLE_RULES):
        if exact >= degree:
            pts, wts = _symmetric_rule(_TRIANGLE_RULES[exact])
            pts.setflags(write=False)
            wts.setflags(write=False)
            return QuadratureRule(pts, wts, exact)
    raise ValueError(f"unsupported triangle quadrature degree {degree} (max {max(_TRIANGLE_RULES)})")


@lru_cache(maxsize=None)
def edge_quadrature(degree: int) -> QuadratureRule:
    """Gauss-Legendre rule on [0, 1] exact for polynomials of ``degree``."""
    if int(degree) != degree or degree < 0:
        raise ValueError(f"unsupported edge quadrature degree {degree!r}")
    npts = int(degree) // 2 + 1
    x, w = np.polynomial.legendre.leggauss(npts)
    pts, wts = 0.5 * (x + 1.0), 0.5 * w
    pts.setflags(write=False)
    wts.setflags(write=False)
    return QuadratureRule(pts, wts, 2 * npts - 1)


def edge_p2_values(t) -> np.ndarray:
    """1D quadratic Lagrange basis on [0, 1]: start, end, midpoint."""
    t = np.asarray(t, dtype=float)
    return np.column_stack([(1 - t) * (1 - 2 * t), t * (2 * t - 1), 4 * t * (1 - t)])


def map_to_physical(tri, ref_point):
    """Affine map of a reference point into triangle ``tri``.

    Returns the physical point, the Jacobian and ``|det J|`` (twice the area).
    Physical gradients are ``inv(J).T @ reference_gradient``.
    """
    tri = np.asarray(tri, dtype=float)
    jac = np.column_stack([tri[1] - tri[0], tri[2] - tri[0]])
    det = abs(np.linalg.det(jac))
    if det <= 1e-14 * max(1.0, np.abs(jac).max() ** 2):
        raise ValueError("degenerate triangle (zero area)")
    x = tri[0] + jac @ np.asarray(ref_point, dtype=float)
    return x, jac, det


@dataclass(frozen=True)
class ElementGeometry:
    """Affine data for every triangle of a mesh.

    ``inv_jac_t[t]`` maps reference gradients to physical ones and
    ``det[t]`` is twice the area of triangle ``t``.
    """

    origin: np.ndarray     # (T, 2)
    jac: np.ndarray        # (T, 2, 2)
    inv_jac_t: np.ndarray  # (T, 2, 2)
    det: np.ndarray        # (T,)

    @classmethod
    def from_coordinates(cls, coords: np.ndarray) -> "ElementGeometry":
        coords = np.asarray(coords, dtype=float)
        e1 = coords[:, 1] - coords[:, 0]
        e2 = coords[:, 2] - coords[:, 0]
        jac = np.stack([e1, e2], axis=2)
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        if np.any(np.abs(det) <= 1e-14):
            raise ValueError("degenerate triangle (zero area)")
        inv_t = np.empty_like(jac)
        inv_t[:, 0, 0] = e2[:, 1] / det
        inv_t[:, 0, 1] = -e1[:, 1] / det
        inv_t[:, 1, 0] = -e2[:, 0] / det
        inv_t[:, 1, 1] = e1[:, 0] / det
        return cls(coords[:, 0].copy(), jac, inv_t, np.abs(det))

    def physical_points(self, ref_points) -> np.ndarray:
        ref = np.asarray(ref_points, dtype=float)
        return self.origin[:, None, :] + np.einsum("tij,qj->tqi", self.jac, ref)

import numpy as np
import scipy.sparse as sps
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from opencavity import verification as ver
from opencavity.assembly import Discretization
from opencavity.mesh import cavity_mesh

X, Y, T = sp.symbols("x y t", real=True)


def _strong_sources(v, p, u, re, pr, gr):
    """Momentum and heat sources from the strong form, differentiated symbolically."""
    vx, vy = v
    conv = [vx * sp.diff(c, X) + vy * sp.diff(c, Y) for c in (vx, vy)]
    lap = [sp.diff(c, X, 2) + sp.diff(c, Y, 2) for c in (vx, vy)]
    gx = sp.diff(vx, T) + conv[0] - lap[0] / re + sp.diff(p, X)
    gy = sp.diff(vy, T) + conv[1] - lap[1] / re + sp.diff(p, Y) - gr / re ** 2 * u
    f = sp.diff(u, T) + vx * sp.diff(u, X) + vy * sp.diff(u, Y) - (sp.diff(u, X, 2) + sp.diff(u, Y, 2)) / (re * pr)
    div = sp.simplify(sp.diff(vx, X) + sp.diff(vy, Y))
    return [sp.lambdify((X, Y, T), e, "numpy") for e in (gx, gy, f)], div


STEADY = ver.SteadyManufactured()
_steady_exprs, _steady_div = _strong_sources(
    (-sp.sin(X) * sp.sin(Y), -sp.cos(X) * sp.cos(Y)), sp.sin(X) * sp.cos(Y),
    1 + sp.cos(sp.pi * X) * sp.cos(sp.pi * Y) / 2, STEADY.re, STEADY.pr, STEADY.gr)

TRANS = ver.TransientManufactured()
_a = 1 + sp.sin(2 * T) / 2
_b = sp.exp(-T) * sp.cos(T)
_c = sp.cos(3 * T)
_trans_exprs, _trans_div = _strong_sources(
    (_a * X ** 2, -2 * _a * X * Y), _c * (X + Y), _b * (X ** 2 + Y), TRANS.re, TRANS.pr, TRANS.gr)

_coord = st.floats(0.0, 1.0, allow_nan=False)


def test_manufactured_velocities_are_solenoidal():
    assert _steady_div == 0
    assert _trans_div == 0


@settings(max_examples=60, deadline=None)
@given(_coord, _coord)
def test_steady_sources_match_symbolic(x, y):
    gx, gy, f = _steady_exprs
    hx, hy = STEADY.momentum_source(x, y)
    assert hx == pytest.approx(gx(x, y, 0.0), abs=1e-12)
    assert hy == pytest.approx(gy(x, y, 0.0), abs=1e-12)
    assert STEADY.heat_source(x, y) == pytest.approx(f(x, y, 0.0), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(_coord, _coord, st.floats(0.0, 2.0))
def test_transient_sources_match_symbolic(x, y, t):
    gx, gy, f = _trans_exprs
    hx, hy = TRANS.momentum_source(x, y, t)
    assert hx == pytest.approx(gx(x, y, t), abs=1e-12)
    assert hy == pytest.approx(gy(x, y, t), abs=1e-12)
    assert TRANS.heat_source(x, y, t) == pytest.approx(f(x, y, t), abs=1e-12)


def test_steady_temperature_has_zero_flux_on_neumann_sides():
    gx, gy = STEADY.temperature_grad(np.array([1.0, 0.3, 0.7]), np.array([0.4, 0.0, 1.0]))
    assert abs(gx[0]) < 1e-15 and abs(gy[1]) < 1e-15 and abs(gy[2]) < 1e-15


def test_order_helpers():
    h = np.array([0.1, 0.05, 0.025])
    err = 3.0 * h ** 2
    assert ver._fit_order(h, err) == pytest.approx(2.0)
    assert ver._pairwise_orders(h, err) == pytest.approx([2.0, 2.0])


def test_error_norms_vanish_on_interpolated_quadratics():
    d = Discretization(cavity_mesh(3))
    u = d.interpolate_scalar(lambda x, y, t: x * x - x * y)
    assert ver.h1_seminorm_error(d, u, lambda x, y, t: (2 * x - y, -x)) < 1e-12
    p = d.interpolate_pressure(lambda x, y, t: 2 * x + y)
    # a constant offset is removed before measuring
    assert ver.pressure_l2_error(d, p + 5.0, lambda x, y, t: 2 * x + y) < 1e-12


def test_mms_coarse_levels_converge():
    rep = ver.mms_steady(ns=(4, 8))
    assert set(rep.errors) >= {"velocity_h1", "temperature_h1", "pressure_l2"}
    for name, errs in rep.errors.items():
        assert errs[1] < errs[0] / 2.5, name
    assert len(rep.lines()) == 1 + len(rep.errors)


def test_transient_solution_lies_in_discrete_spaces():
    d = Discretization(cavity_mesh(2))
    s = TRANS.state(d, 0.3)
    xy = d.mesh.p2_coordinates
    vx, vy = TRANS.velocity(xy[:, 0], xy[:, 1], 0.3)
    np.testing.assert_allclose(s.v, np.concatenate([vx, vy]))
    u_fine = d.interpolate_scalar(TRANS.temperature, 0.3)
    np.testing.assert_allclose(s.u, u_fine)


def test_projection_is_discretely_solenoidal(rng):
    d = Discretization(cavity_mesh(4))
    r = rng.normal(size=2 * d.n)
    v = ver.project_divergence_free(d, r)
    b = sps.hstack([d.div_x, d.div_y])
    assert np.abs(b @ v).max() < 1e-10 * max(1.0, np.abs(v).max())
    # projecting twice changes nothing
    np.testing.assert_allclose(ver.project_divergence_free(d, v), v, atol=1e-10)


def test_invariant_suite_passes():
    checks = ver.invariant_suite()
    failing = [(c.name, c.detail) for c in checks if not c.passed]
    assert not failing
    assert len({c.name for c in checks}) == len(checks)

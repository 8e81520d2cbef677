import numpy as np
import pytest
import scipy.sparse as sp

from opencavity.linalg import (LuSolver, SingularMatrixError, canonical, from_triplets, matvec,
                               nested_dissection, solve_direct)


def test_empty_triplets():
    a = from_triplets(3, 4, [], [], [])
    assert a.shape == (3, 4) and a.nnz == 0


def test_duplicates_summed():
    a = from_triplets(2, 2, [0, 0], [0, 0], [1.0, 2.0])
    assert a.nnz == 1 and a[0, 0] == 3.0


def test_out_of_range_rejected():
    with pytest.raises(IndexError):
        from_triplets(2, 2, [0, 2], [0, 0], [1.0, 1.0])


def test_random_triplets_match_dense(rng):
    rows = rng.integers(0, 20, 200)
    cols = rng.integers(0, 20, 200)
    vals = rng.standard_normal(200)
    dense = np.zeros((20, 20))
    np.add.at(dense, (rows, cols), vals)
    a = from_triplets(20, 20, rows, cols, vals)
    assert np.allclose(a.toarray(), dense)
    assert a.has_canonical_format
    for i in range(20):
        idx = a.indices[a.indptr[i]:a.indptr[i + 1]]
        assert np.all(np.diff(idx) > 0)


def test_matvec(rng):
    x = rng.standard_normal(10)
    assert np.allclose(matvec(sp.identity(10, format="csr"), x), x)
    assert np.all(matvec(sp.csr_matrix((10, 10)), x) == 0)
    d = rng.standard_normal((10, 10))
    assert np.allclose(matvec(sp.csr_matrix(d), x), d @ x)
    with pytest.raises(ValueError):
        matvec(sp.identity(3, format="csr"), x)


def test_solve_identity_and_hand_example():
    b = np.array([1.0, -2.0, 3.0])
    assert np.allclose(solve_direct(sp.identity(3, format="csr"), b), b)
    x = solve_direct(sp.csr_matrix([[2.0, 1.0], [1.0, 3.0]]), np.array([3.0, 4.0]))
    assert np.allclose(x, [1, 1])


def test_zero_matrix_singular():
    with pytest.raises(SingularMatrixError) as exc:
        solve_direct(sp.csr_matrix((3, 3)), np.ones(3))
    assert exc.value.row == 0


def test_numerically_singular():
    a = sp.csr_matrix([[1.0, 2.0], [2.0, 4.0]])
    with pytest.raises(SingularMatrixError):
        solve_direct(a, np.array([1.0, 0.0]))


def test_shape_errors():
    with pytest.raises(ValueError):
        solve_direct(sp.csr_matrix((2, 3)), np.ones(2))
    with pytest.raises(ValueError):
        solve_direct(sp.identity(2, format="csr"), np.ones(3))


@pytest.mark.parametrize("seed", range(5))
def test_round_trip_spd(seed):
    rng = np.random.default_rng(seed)
    n = 200
    a = sp.random(n, n, density=0.02, random_state=rng, format="csr")
    a = a + a.T + n * sp.identity(n)
    x = rng.standard_normal(n)
    y = solve_direct(a, a @ x)
    assert np.abs(x - y).max() <= 1e-8 * np.abs(x).max()


def test_nested_dissection_is_permutation():
    lat = np.array([(i, j) for i in range(0, 41) for j in range(0, 41)])
    perm = nested_dissection(lat, leaf_size=16)
    assert sorted(perm) == list(range(len(lat)))


def test_ordered_solve_matches_colamd(cav4):
    from opencavity.assembly import Params, State, assemble_momentum
    from opencavity.boundary_conditions import BcCombo
    d = cav4
    rng = np.random.default_rng(0)
    st = State(rng.standard_normal(2 * d.n), np.zeros(d.np), rng.standard_normal(d.n), 0.0)
    sysm = assemble_momentum(st, st.v, st.u, Params(3, 1, 1000, 0.01), BcCombo("ddn", "n"), d)
    x1 = solve_direct(sysm.matrix, sysm.rhs, sysm.ordering)
    x2 = solve_direct(sysm.matrix, sysm.rhs)
    assert np.allclose(x1, x2, rtol=1e-9, atol=1e-10)


def test_solver_reuses_factorisation(rng):
    a = sp.random(50, 50, density=0.1, random_state=0, format="csr") + 10 * sp.identity(50)
    solver = LuSolver()
    b = rng.standard_normal(50)
    solver.solve(a, b)
    solver.solve(canonical(a.copy()), 2 * b)
    assert solver.factorisations == 1
    a2 = a + sp.identity(50)
    x = solver.solve(a2, b)
    assert solver.factorisations == 2
    assert np.allclose(a2 @ x, b)

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from srk import solver, testeqs


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(1, 6), st.floats(0.01, 30))
def test_matrix_exp_against_scipy(seed, n, scale):
    A = np.random.default_rng(seed).normal(size=(n, n)) * scale / n
    want = expm(A)
    got = testeqs.matrix_exp(A)
    assert np.max(np.abs(got - want)) <= 1e-11 * np.max(np.abs(want))


def test_matrix_exp_batched_and_special_cases():
    g = np.random.default_rng(1)
    A = g.normal(size=(5, 3, 3)) * np.array([0.01, 1, 5, 20, 0])[:, None, None]
    got = testeqs.matrix_exp(A)
    for k in range(5):
        assert np.allclose(got[k], expm(A[k]), rtol=1e-12, atol=1e-14)
    assert np.allclose(testeqs.matrix_exp(np.zeros((2, 2))), np.eye(2), rtol=0, atol=1e-15)
    assert testeqs.matrix_exp([[1.0]])[0, 0] == pytest.approx(np.e, rel=1e-15)
    with pytest.raises(ValueError):
        testeqs.matrix_exp(np.ones((2, 3)))
    with pytest.raises(ValueError):
        testeqs.matrix_exp([[np.nan]])


def test_matrix_exp_diagonal_and_nilpotent():
    D = np.diag([-2.0, 0.5, 3.0])
    assert np.allclose(testeqs.matrix_exp(D), np.diag(np.exp([-2.0, 0.5, 3.0])), rtol=1e-14)
    N = np.array([[0.0, 1.0], [0.0, 0.0]])
    assert np.allclose(testeqs.matrix_exp(N), [[1.0, 1.0], [0.0, 1.0]], rtol=0, atol=1e-15)


@pytest.mark.parametrize("name,dim,d,m", [("eq1", None, 1, 1), ("eq2", None, 1, 1), ("eq3", 4, 1, 4),
                                          ("eq4", 3, 3, 3), ("eq5", None, 2, 4), ("eq6", 5, 5, 5)])
def test_dimensions(name, dim, d, m):
    p = testeqs.get_problem(name, dim)
    assert (p.d, p.m) == (d, m)
    assert p.name == name
    assert p.has_exact == (name in ("eq1", "eq2", "eq3", "eq4"))


def test_unknown_problem():
    with pytest.raises(KeyError):
        testeqs.get_problem("eq7")
    with pytest.raises(ValueError):
        testeqs.eq4(0)


@pytest.mark.parametrize("name,dim", [("eq1", None), ("eq2", None), ("eq3", 2), ("eq4", 2)])
def test_exact_solution_at_zero_is_x0(name, dim):
    p = testeqs.get_problem(name, dim)
    assert np.allclose(p.exact_solution(0.0, np.zeros(p.m)), p.x0, rtol=0, atol=1e-15)


@pytest.mark.parametrize("name,dim", [("eq1", None), ("eq2", None), ("eq3", 2), ("eq4", 2)])
def test_fine_solver_tracks_exact_solution(name, dim):
    p = testeqs.get_problem(name, dim)
    s = "SRIC2s1" if p.noise_class != "additive" else "SRA2s1"
    tr = solver.integrate(p, s, 2 ** 12, seed=3, paths=[0, 1, 2, 3])
    exact = np.stack([p.exact_solution(1.0, w) for w in tr.W[:, -1]])
    assert np.max(np.abs(tr.Y[:, -1] - exact)) < 5e-3 * (1 + np.max(np.abs(exact)))


def test_eq4_exact_batched():
    p = testeqs.eq4(3)
    W = np.random.default_rng(0).normal(size=(4, 3))
    batch = p.exact_solution(1.0, W)
    for k in range(4):
        assert np.allclose(batch[k], p.exact_solution(1.0, W[k]), rtol=1e-14)


def test_eq6_noise_is_tridiagonal():
    p = testeqs.eq6(4)
    b = p.diffusion(0.0, np.arange(1.0, 5.0))
    assert b[0, 2] == 0 and b[0, 1] == pytest.approx(2.0 / 5) and b[3, 3] == pytest.approx(4.0 / 5)
    assert p.params["boundary"] == testeqs.LV_BOUNDARY


def test_reference_config():
    cfg = testeqs.ReferenceConfig()
    assert cfg.n_steps(testeqs.eq5()) == 2 ** 14
    with pytest.raises(ValueError):
        testeqs.ReferenceConfig(h_ref=0.3).n_steps(testeqs.eq5())


def test_reference_trajectory_matches_batch_integration():
    p = testeqs.eq5()
    cfg = testeqs.ReferenceConfig(h_ref=2.0 ** -8)
    grid, term = testeqs.reference_trajectory(p, cfg, 4, 2)
    tr = solver.integrate(p, "MIL", 2 ** 8, seed=4, paths=[2])
    assert np.array_equal(term, tr.Y[0, -1])
    assert grid.n_fine == 2 ** 8 and grid.I is not None

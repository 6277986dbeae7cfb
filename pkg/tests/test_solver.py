import numpy as np
import pytest

from modhelm import oracle, problems
from modhelm.errors import ConfigurationError, ConvergenceError
from modhelm.geometry import Domain, ellipse
from modhelm.postprocess import (check_points, eval_field, max_error, reference_normal_derivative,
                                 reference_solution)
from modhelm.solver import ProblemSpec, build_rhs, check_linearity, gmres, solve


def disk(n=128, bounded=True):
    return Domain([ellipse((0, 0), (1, 1), 0, n)], bounded)


def test_rhs_scaling():
    d = disk(64)
    assert np.all(build_rhs(ProblemSpec(d, 0.5, "dirichlet", [0.0])) == 0)
    np.testing.assert_allclose(build_rhs(ProblemSpec(d, 0.5, "dirichlet", [1.0])), -0.5)
    np.testing.assert_allclose(build_rhs(ProblemSpec(d, 0.5, "neumann", [1.0])), 0.5)


def test_neumann_data_on_circle_around_source():
    c = ellipse((0.2, -0.1), (0.3, 0.3), 0, 64)
    g = reference_normal_derivative([[0.2, -0.1]], 0.4, c.points, c.normal)
    k1 = float(oracle.mp_bessel_k(1, 0.3 / 0.4))
    np.testing.assert_allclose(g, -k1 / 0.4, rtol=1e-12)


def test_spec_validation():
    d = disk(64)
    with pytest.raises(ConfigurationError):
        ProblemSpec(d, 0.0, "dirichlet", [1.0])
    with pytest.raises(ConfigurationError):
        ProblemSpec(d, 1.0, "dirichlet", [1.0, 2.0])
    with pytest.raises(ConfigurationError):
        ProblemSpec(d, 1.0, "dirichlet", [np.ones(10)])
    with pytest.raises(ConfigurationError):
        ProblemSpec(d, 1.0, "dirichlet", [np.nan])
    with pytest.raises(ConfigurationError):
        ProblemSpec(d, 1.0, "dirichlet", [1.0], quad_order=3)
    with pytest.raises(ConfigurationError):
        ProblemSpec(d, 1.0, "dirichlet", None)


def test_gmres_identity():
    b = np.arange(1.0, 6.0)
    res = gmres(lambda v: v, b)
    assert res.iterations == 1 and res.converged
    np.testing.assert_allclose(res.x, b)


def test_gmres_zero_rhs():
    res = gmres(lambda v: 2 * v, np.zeros(4))
    assert res.iterations == 0 and np.all(res.x == 0)


def test_gmres_random_system(rng):
    A = np.eye(50) * 4 + rng.standard_normal((50, 50)) / np.sqrt(50)
    b = rng.standard_normal(50)
    res = gmres(lambda v: A @ v, b, tol=1e-13)
    np.testing.assert_allclose(res.x, np.linalg.solve(A, b), atol=1e-9)
    assert res.residuals[0] == 1.0
    assert all(a >= b_ - 1e-15 for a, b_ in zip(res.residuals, res.residuals[1:]))


def test_gmres_restart(rng):
    A = np.eye(80) * 3 + rng.standard_normal((80, 80)) / np.sqrt(80)
    b = rng.standard_normal(80)
    res = gmres(lambda v: A @ v, b, tol=1e-10, restart=5)
    assert res.converged and res.true_residual <= 1e-10
    np.testing.assert_allclose(A @ res.x, b, atol=1e-8)


def test_gmres_nonconvergence_reports_history(rng):
    A = np.diag(np.linspace(1, 1e4, 200))
    b = rng.standard_normal(200)
    with pytest.raises(ConvergenceError) as info:
        gmres(lambda v: A @ v, b, tol=1e-12, max_iter=5)
    assert info.value.iterations == 5
    assert len(info.value.residuals) == 6
    res = gmres(lambda v: A @ v, b, tol=1e-12, max_iter=5, raise_on_failure=False)
    assert not res.converged


def test_linearity_check():
    assert check_linearity(lambda v: 3 * v, 10)
    assert not check_linearity(lambda v: v**2, 10)
    with pytest.raises(ConfigurationError):
        gmres(lambda v: v**2, np.ones(10), check_linear=True)


def test_disk_dirichlet_center_value():
    sol = solve(ProblemSpec(disk(), 0.5, "dirichlet", [1.0]))
    u0 = eval_field(sol, [[0.0, 0.0]]).values[0]
    assert u0 == pytest.approx(oracle.derived_constants()["1/I0(2)"], abs=1e-12)
    assert sol.iterations < 30 and sol.wall_time > 0


def test_disk_interior_neumann():
    sol = solve(ProblemSpec(disk(), 0.5, "neumann", [1.0]))
    u = eval_field(sol, [[0.3, 0.0], [0.0, -0.3]]).values
    ref = oracle.DiskSolution(1.0, 0.5, "neumann", 1.0)(0.3)
    np.testing.assert_allclose(u, ref, rtol=1e-11)


def test_fmm_backend_matches_dense():
    d = problems.example1_domain(64)
    dense = solve(problems.reference_spec(d, "dirichlet", 0.1))
    fast = solve(problems.reference_spec(d, "dirichlet", 0.1, backend="fmm"))
    assert abs(dense.iterations - fast.iterations) <= 1
    assert np.max(np.abs(dense.density - fast.density)) <= 1e-9 * np.max(np.abs(dense.density))


def test_eleven_curve_accuracy():
    d = problems.example1_domain(128)
    sol = solve(problems.reference_spec(d, "dirichlet", 0.1, quad_order=8))
    pts = check_points(problems.example1_domain(256), 20)
    ref = reference_solution(problems.example1_sources(), 0.1, pts)
    assert max_error(eval_field(sol, pts), ref) <= 1e-9
    assert len(sol.per_curve) == 11
    assert sol.relative_residual <= 1e-11

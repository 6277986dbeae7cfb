import numpy as np
import pytest

from modhelm import kernels, oracle, problems
from modhelm.errors import ConfigurationError, DomainError
from modhelm.geometry import Domain, ellipse
from modhelm.kernels import (DiscreteOperator, KernelKind, apply_operator, assemble_dense,
                             kernel_diagonal, kernel_eval)
from modhelm.oracle import mp_bessel_k
from modhelm.solver import gmres


def test_kernel_value_k1():
    v = kernel_eval("dirichlet", [1, 0], [0, 0], [1, 0], [0, 1], 1.0)
    assert v == pytest.approx(float(mp_bessel_k(1, 1)), rel=1e-14)


def test_kernel_vanishes_for_perpendicular_normal():
    assert kernel_eval("dirichlet", [1, 0], [0, 0], [0, 1], [0, 1], 0.3) == 0.0


def test_neumann_is_dirichlet_with_swapped_normal(rng):
    y, x = rng.standard_normal((2, 5, 2))
    n = rng.standard_normal((5, 2))
    other = rng.standard_normal((5, 2))
    np.testing.assert_array_equal(kernel_eval("neumann", y, x, other, n, 0.7),
                                  kernel_eval("dirichlet", y, x, n, other, 0.7))


def test_kernel_errors():
    with pytest.raises(DomainError):
        kernel_eval("dirichlet", [0, 0], [0, 0], [1, 0], [1, 0], 1.0)
    with pytest.raises(ConfigurationError):
        KernelKind.parse("robin")


def test_diagonal_values():
    assert kernel_diagonal(1.0) == 0.5
    assert kernel_diagonal(0.0) == 0.0
    assert kernel_diagonal(1.0, "neumann") == -0.5


@pytest.mark.parametrize("kind", ["dirichlet", "neumann"])
def test_diagonal_limit_on_circle(kind):
    c = ellipse((0, 0), (1, 1), 0, 64)
    x, n = c.points[0], c.normal[0]
    scaled = []
    for delta in (1e-2, 1e-3, 1e-4):
        y = np.array([np.cos(delta), np.sin(delta)])
        v = kernel_eval(kind, y, x, y, n, 1.0)
        # x K_1(x) = 1 + (x^2/2) log x + O(x^2): the error is O(delta^2 log delta)
        scaled.append(abs(v - kernel_diagonal(1.0, kind)) / (delta**2 * (1 - np.log(delta))))
    assert max(scaled) < 0.5
    assert scaled[2] == pytest.approx(scaled[1], rel=0.2)


def test_identity_block(monkeypatch):
    monkeypatch.setattr(kernels, "bessel_k01", lambda x: (np.zeros_like(x), np.zeros_like(x)))
    d = Domain([ellipse((0, 0), (1, 0.5), 0.2, 64)], True)
    A = assemble_dense(DiscreteOperator(d, "dirichlet", 0.5, 8))
    np.testing.assert_array_equal(A, np.eye(64))


@pytest.mark.parametrize("kind", ["dirichlet", "neumann"])
def test_dense_converges_to_oversampled_oracle(kind):
    errs = []
    for n in (32, 64):
        c = ellipse((0, 0), (1, 0.6), 0.3, n)
        s = np.cos(c.params)
        a = apply_operator(DiscreteOperator(Domain([c], True), kind, 0.5, 4), s)
        errs.append(np.max(np.abs(a - oracle.oversampled_operator(c, kind, 0.5, s))))
    assert errs[0] / errs[1] >= 2 ** 3.5
    c = ellipse((0, 0), (1, 1), 0, 64)
    s = np.cos(c.params)
    a = apply_operator(DiscreteOperator(Domain([c], True), kind, 0.5, 8), s)
    assert np.max(np.abs(a - oracle.oversampled_operator(c, kind, 0.5, s))) < 1e-10


def test_disk_gmres_iterations():
    d = Domain([ellipse((0, 0), (1, 1), 0, 128)], True)
    op = DiscreteOperator(d, "dirichlet", 0.5, 8)
    res = gmres(op.apply, np.full(128, -0.5), tol=1e-11)
    assert res.iterations < 30


def three_curves(n):
    return Domain([ellipse((0, 0), (1, 1), 0, n), ellipse((-0.4, 0.1), (0.2, 0.1), 0.3, n),
                   ellipse((0.35, -0.2), (0.15, 0.25), 1.0, n)], True)


def test_zero_density():
    op = DiscreteOperator(three_curves(64), "dirichlet", 0.5, 8, backend="fmm")
    np.testing.assert_array_equal(op.apply(np.zeros(192)), 0.0)


@pytest.mark.parametrize("kind", ["dirichlet", "neumann"])
@pytest.mark.parametrize("p", [0, 8, 16])
def test_dense_fmm_three_curves(kind, p, rng):
    d = three_curves(256)
    s = rng.standard_normal(d.size)
    a = DiscreteOperator(d, kind, 0.1, p).apply(s)
    b = DiscreteOperator(d, kind, 0.1, p, backend="fmm").apply(s)
    assert np.max(np.abs(a - b)) / np.max(np.abs(a)) <= 1e-10


def test_dense_fmm_example1_geometry(rng):
    d = problems.example1_domain(64)
    assert d.size == 704
    s = rng.standard_normal(d.size)
    a = DiscreteOperator(d, "dirichlet", 0.1, 8).apply(s)
    b = DiscreteOperator(d, "dirichlet", 0.1, 8, backend="fmm").apply(s)
    assert np.max(np.abs(a - b)) <= 1e-10


def test_unbounded_uses_hole_orientation():
    d = Domain([ellipse((0, 0), (1, 1), 0, 64)], False)
    op = DiscreteOperator(d, "dirichlet", 0.5, 0)
    # hole normals point into the circle, so the signed curvature is -1
    np.testing.assert_allclose(op.diagonal(), d.weights * -0.5 / np.pi, atol=1e-14)


def test_operator_validation():
    d = Domain([ellipse((0, 0), (1, 1), 0, 16)], True)
    with pytest.raises(ConfigurationError):
        DiscreteOperator(d, "dirichlet", 0.5, 16)
    with pytest.raises(ConfigurationError):
        DiscreteOperator(d, "dirichlet", -1.0, 2)
    with pytest.raises(ConfigurationError):
        DiscreteOperator(d, "dirichlet", 1.0, 2, backend="gpu")
    op = DiscreteOperator(d, "dirichlet", 1.0, 2)
    with pytest.raises(ConfigurationError):
        op.apply(np.zeros(3))
    with pytest.raises(ConfigurationError):
        DiscreteOperator(d, "dirichlet", 1.0, 2, dense_cap=8).assemble()

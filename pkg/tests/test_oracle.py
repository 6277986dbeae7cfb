import mpmath
import numpy as np
import pytest

from modhelm import oracle
from modhelm.geometry import ellipse


def test_derived_constants():
    c = oracle.derived_constants()
    assert float(c["K0(1)"]) == pytest.approx(0.42102443824070834, rel=1e-15)
    assert float(c["K1(1)"]) == pytest.approx(0.6019072301972346, rel=1e-15)
    assert float(c["I1(2)"]) == pytest.approx(1.5906368546373291, rel=1e-15)
    assert float(c["K0(1)*I0(1)"]) == pytest.approx(0.5330, abs=1e-4)
    assert float(c["1/I0(2)"]) == pytest.approx(0.43867, abs=1e-5)


def test_series_against_mpmath_besselk():
    for x in (1e-4, 0.3, 2.5, 40.0):
        for n in (0, 1, 7):
            with mpmath.workdps(40):
                assert abs(oracle.mp_bessel_k(n, x) / mpmath.besselk(n, x) - 1) < 1e-25
                assert abs(oracle.mp_bessel_i(n, x) / mpmath.besseli(n, x) - 1) < 1e-25


@pytest.mark.parametrize("kind,exterior", [("dirichlet", False), ("neumann", False),
                                           ("dirichlet", True), ("neumann", True)])
def test_disk_solution_satisfies_pde(kind, exterior):
    a, h = 0.5, 1e-4
    sol = oracle.DiskSolution(1.0, a, kind, 1.0, exterior)
    r = np.linspace(1.05, 3.0, 50) if exterior else np.linspace(0.05, 0.95, 50)
    u, up, um = sol(r), sol(r + h), sol(r - h)
    lap = (up - 2 * u + um) / h**2 + (up - um) / (2 * h * r)
    assert np.max(np.abs(u - a**2 * lap)) <= 1e-8 * max(1.0, np.max(np.abs(u)))


def test_disk_solution_boundary_data():
    a = 0.5
    d = oracle.DiskSolution(1.0, a, "dirichlet", 2.0)
    assert d(1.0) == pytest.approx(2.0, rel=1e-14)
    n = oracle.DiskSolution(1.0, a, "neumann", 2.0)
    h = 1e-6
    assert (n(1 + h) - n(1 - h)) / (2 * h) == pytest.approx(2.0, rel=1e-7)
    ne = oracle.DiskSolution(1.0, a, "neumann", 2.0, exterior=True)
    assert -(ne(1 + h) - ne(1 - h)) / (2 * h) == pytest.approx(2.0, rel=1e-7)


def test_oversampled_zero_density():
    c = ellipse((0, 0), (1.0, 0.6), 0.3, 32)
    out = oracle.oversampled_operator(c, "dirichlet", 0.5, np.zeros(32))
    assert np.all(out == 0)


def test_oversampled_refinement_agrees(rng):
    c = ellipse((0.1, 0), (1.0, 0.6), 0.3, 32)
    sigma = np.cos(2 * np.pi * np.arange(32) / 32) + 0.3
    for kind in ("dirichlet", "neumann"):
        a = oracle.oversampled_operator(c, kind, 0.5, sigma, factor=8)
        b = oracle.oversampled_operator(c, kind, 0.5, sigma, factor=16)
        assert np.max(np.abs(a - b)) <= 1e-12


def test_oversampled_factor_guard():
    c = ellipse((0, 0), (1, 1), 0, 16)
    with pytest.raises(ValueError):
        oracle.oversampled_operator(c, "dirichlet", 1.0, np.ones(16), factor=4)


def test_direct_sum_mp_single_pair():
    v = oracle.direct_sum_mp([[0, 0]], [[1, 0]], 1.0, charges=[2.0])
    assert v[0] == pytest.approx(2 * 0.42102443824070834, rel=1e-15)
    dip = oracle.direct_sum_mp([[0, 0]], [[1, 0]], 1.0, dipoles=[1.0], directions=[[1, 0]])
    assert dip[0] == pytest.approx(0.6019072301972346, rel=1e-15)

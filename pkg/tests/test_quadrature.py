import mpmath
import numpy as np
import pytest

from modhelm.errors import ConfigurationError
from modhelm.quadrature import (ALPERT_SHAPES, ALPERT_TABLES, SUPPORTED_ORDERS, alpert_rule,
                                generate_alpert_rule, integrate_log_singular, trapezoid)


def log_kernel(t):
    return np.log(np.abs(2 * np.sin(np.asarray(t) / 2)))


def test_trapezoid_smooth():
    assert trapezoid(lambda t: np.sin(t) ** 2, 32) == pytest.approx(np.pi, abs=1e-14)


def test_order_zero_is_trapezoid():
    r = alpert_rule(0)
    assert r.a == 1 and r.l == 0


@pytest.mark.parametrize("p", [2, 4, 8, 16])
def test_rule_shape_and_positive_weights(p):
    r = alpert_rule(p)
    assert (r.a, r.l) == ALPERT_SHAPES[p]
    assert np.all(r.weights > 0) and np.all(r.offsets > 0)
    # k = 0 moment: sum u_n = -zeta(0, a) = a - 1/2
    assert np.sum(r.weights) == pytest.approx(r.a - 0.5, rel=1e-14)


def test_unsupported_order():
    with pytest.raises(ConfigurationError):
        alpert_rule(6)


def test_log_kernel_integral_is_zero():
    r = alpert_rule(8)
    val = integrate_log_singular(log_kernel, 128, 0, r)
    assert abs(val) <= 1e-9


def test_smooth_integrand_matches_trapezoid():
    f = lambda t: np.exp(np.cos(t))
    exact = 2 * np.pi * float(mpmath.besseli(0, 1))
    for p in (2, 4, 8, 16):
        r = alpert_rule(p)
        errs = [abs(integrate_log_singular(f, n, 3, r) - exact) for n in (64, 128)]
        assert errs[1] <= max(errs[0] * 2.0**-(p - 1), 1e-13)


def cos_log_error(p, n, dps=60):
    """Error of the order-p rule on log|2 sin(t/2)| cos t (exact value -pi)."""
    f = lambda t: mpmath.log(abs(2 * mpmath.sin(t / 2))) * mpmath.cos(t)
    with mpmath.workdps(dps):
        return abs(integrate_log_singular(f, n, 0, alpert_rule(p), dps=dps) + mpmath.pi)


@pytest.mark.parametrize("p", [2, 4, 8, 16])
def test_observed_order(p):
    e1, e2 = cos_log_error(p, 128), cos_log_error(p, 256)
    assert float(mpmath.log(e1 / e2, 2)) >= p - 0.5


def test_double_precision_order_four():
    n1, n2 = 128, 256
    f = lambda t: log_kernel(t) * np.cos(t)
    e = [abs(integrate_log_singular(f, n, 0, alpert_rule(4)) + np.pi) for n in (n1, n2)]
    assert e[0] / e[1] >= 2 ** 3.5


def test_samples_are_interpolated():
    r = alpert_rule(8)
    n = 64
    t = 2 * np.pi * np.arange(n) / n
    s = np.cos(t)
    a = integrate_log_singular(log_kernel, n, 0, r, samples=s)
    b = integrate_log_singular(lambda x: log_kernel(x) * np.cos(x), n, 0, r)
    assert a == pytest.approx(b, abs=1e-13)


def test_mp_path_matches_double():
    r = alpert_rule(4)
    f_mp = lambda t: mpmath.log(abs(2 * mpmath.sin(t / 2))) * mpmath.cos(t)
    f = lambda t: log_kernel(t) * np.cos(t)
    a = integrate_log_singular(f_mp, 64, 0, r, dps=30)
    b = integrate_log_singular(f, 64, 0, r)
    assert float(a) == pytest.approx(b, abs=1e-13)


def test_too_few_nodes():
    with pytest.raises(ConfigurationError):
        integrate_log_singular(log_kernel, 16, 0, alpert_rule(16))


def test_regenerate_order_four_table():
    pairs = generate_alpert_rule(4, dps=40)
    _, table = ALPERT_TABLES[4]
    for (v, u), (vt, ut) in zip(pairs, table):
        assert float(v) == pytest.approx(float(vt), rel=1e-25)
        assert float(u) == pytest.approx(float(ut), rel=1e-25)


def test_supported_orders():
    assert SUPPORTED_ORDERS == (0, 2, 4, 8, 16)

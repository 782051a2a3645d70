"""Kernel shapes and one-sided moment constants"""

import numpy as np
import pytest
from scipy import integrate

from src.core.kernels import KernelKind, constants_from_moments, kernel_constants, kernel_eval

WEIGHT_KERNELS = [KernelKind.TRIANGULAR, KernelKind.EPANECHNIKOV, KernelKind.UNIFORM]


def _quad(fn):
    value, _ = integrate.quad(fn, 0.0, 1.0, epsabs=1e-14, epsrel=1e-14)
    return value


@pytest.mark.parametrize("kind", WEIGHT_KERNELS, ids=lambda k: k.value)
def test_moments_match_quadrature(kind):
    k = kernel_constants(kind)
    for j, mu in enumerate(k.mu):
        assert mu == pytest.approx(_quad(lambda u: u ** j * kernel_eval(kind, u)), abs=1e-10)
    for j, nu in enumerate(k.nu):
        assert nu == pytest.approx(_quad(lambda u: u ** j * kernel_eval(kind, u) ** 2), abs=1e-10)


@pytest.mark.parametrize("kind", WEIGHT_KERNELS, ids=lambda k: k.value)
def test_weight_kernels_integrate_to_one(kind):
    total, _ = integrate.quad(lambda u: kernel_eval(kind, u), -1.0, 1.0)
    assert total == pytest.approx(1.0, abs=1e-12)


def test_triangular_constants():
    k = kernel_constants(KernelKind.TRIANGULAR)
    assert k.b1 == pytest.approx(-0.1, abs=1e-15)
    assert k.v == pytest.approx(4.8, abs=1e-12)
    assert k.xi1 == pytest.approx(-0.1, abs=1e-15)
    assert k.xi2 == pytest.approx(-0.08, abs=1e-15)
    assert (k.v / k.b1 ** 2) ** (1 / 5) == pytest.approx(3.4375, abs=1e-4)


def test_constants_from_float_moments_agree_with_exact():
    exact = kernel_constants(KernelKind.EPANECHNIKOV)
    mu = [_quad(lambda u, j=j: u ** j * kernel_eval(KernelKind.EPANECHNIKOV, u)) for j in range(5)]
    nu = [_quad(lambda u, j=j: u ** j * kernel_eval(KernelKind.EPANECHNIKOV, u) ** 2) for j in range(3)]
    approx = constants_from_moments(KernelKind.EPANECHNIKOV, mu, nu)
    assert approx.b1 == pytest.approx(exact.b1, rel=1e-9)
    assert approx.v == pytest.approx(exact.v, rel=1e-9)


def test_jones_derivative_kernel():
    assert kernel_eval(KernelKind.JONES_DERIVATIVE, 0.5) == pytest.approx(-1.40625)
    assert kernel_eval(KernelKind.JONES_DERIVATIVE, 0.0) == 0.0
    # integrates to zero, first moment -1
    zeroth, _ = integrate.quad(lambda u: kernel_eval(KernelKind.JONES_DERIVATIVE, u), -1, 1)
    first, _ = integrate.quad(lambda u: u * kernel_eval(KernelKind.JONES_DERIVATIVE, u), -1, 1)
    assert zeroth == pytest.approx(0.0, abs=1e-12)
    assert first == pytest.approx(-1.0, abs=1e-12)


def test_jones_kernel_has_no_weight_constants():
    with pytest.raises(ValueError):
        kernel_constants(KernelKind.JONES_DERIVATIVE)


def test_kernel_eval_support_and_shapes():
    u = np.array([-1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5])
    values = kernel_eval(KernelKind.TRIANGULAR, u)
    assert isinstance(values, np.ndarray)
    np.testing.assert_allclose(values, [0, 0, 0.5, 1.0, 0.5, 0, 0])
    assert isinstance(kernel_eval("uniform", 0.2), float)
    assert kernel_eval(KernelKind.EPANECHNIKOV, 1.0) == 0.0


def test_to_dict_is_plain():
    data = kernel_constants(KernelKind.UNIFORM).to_dict()
    assert data["kind"] == "uniform"
    assert len(data["mu"]) == 5 and len(data["nu"]) == 3

import numpy as np
import pytest

from conservolast.kernels import FAMILIES, Kernel, RadialVector, spatial_grad, spatial_hess


def fd1(f, r, h=1e-6):
    return (f(r + h) - f(max(r - h, 0.0) if r < h else r - h)) / (2 * h)


def central(f, r, h=1e-6):
    return (f(r + h) - f(r - h)) / (2 * h)


def test_value_examples():
    assert Kernel("multiquadric", 4.0).value(3.0) == pytest.approx(5.0, abs=1e-15)
    assert Kernel("multiquadric", 1.0).value(0.0) == pytest.approx(1.0, abs=1e-15)
    for r0 in (0.5, 1.0, 3.0):
        assert Kernel("gaussian", r0).value(0.0) == pytest.approx(1.0, abs=1e-15)


def test_d1_examples():
    assert Kernel("multiquadric", 4.0).d1(3.0) == pytest.approx(0.6, abs=1e-15)
    for family in FAMILIES:
        assert Kernel(family, 1.3).d1(0.0) == 0.0
    k = Kernel("multiquadric", 1.0)
    fd = central(lambda r: float(k.value(r)), 1.0)
    assert abs(float(k.d1(1.0)) - fd) <= 1e-8 * abs(fd)


def test_d2_examples():
    assert Kernel("multiquadric", 1.0).d2(0.0) == pytest.approx(1.0, abs=1e-15)
    assert Kernel("multiquadric", 4.0).d2(3.0) == pytest.approx(16.0 / 125.0, abs=1e-15)
    k = Kernel("gaussian", 0.7)
    for r in (0.2, 0.9, 2.1):
        fd = central(lambda rr: float(k.d1(rr)), r)
        assert abs(float(k.d2(r)) - fd) <= 1e-8 * max(1.0, abs(fd))


def test_spatial_grad():
    k = Kernel("multiquadric", 4.0)
    np.testing.assert_allclose(k.grad(np.zeros(3)), np.zeros(3))
    np.testing.assert_allclose(k.grad(np.array([3.0, 0.0, 0.0])),
                               np.array([0.6, 0.0, 0.0]), atol=1e-15)
    rng = np.random.default_rng(5)
    for family in FAMILIES:
        kk = Kernel(family, 0.8)
        delta = rng.normal(0, 0.7, 3)
        g = kk.grad(delta)
        fd = np.empty(3)
        for i in range(3):
            e = np.zeros(3)
            e[i] = 1e-6
            fd[i] = (kk.value(np.linalg.norm(delta + e))
                     - kk.value(np.linalg.norm(delta - e))) / 2e-6
        assert np.linalg.norm(g - fd) <= 1e-7 * max(1.0, np.linalg.norm(g))


def test_spatial_hess():
    np.testing.assert_allclose(Kernel("multiquadric", 1.0).hess(np.zeros(3)), np.eye(3))
    rng = np.random.default_rng(6)
    for family in FAMILIES:
        k = Kernel(family, 1.1)
        delta = rng.normal(0, 0.6, 3)
        h = k.hess(delta)
        assert np.max(np.abs(h - h.T)) <= 1e-14
        fd = np.empty((3, 3))
        for i in range(3):
            e = np.zeros(3)
            e[i] = 1e-6
            fd[:, i] = (k.grad(delta + e) - k.grad(delta - e)) / 2e-6
        assert np.linalg.norm(h - fd) <= 1e-6 * max(1.0, np.linalg.norm(h))


def test_gradient_equivalence():
    k = Kernel("multiquadric", 4.0)
    assert float(k.d1_over_r(3.0)) == pytest.approx(0.2, abs=1e-15)
    assert float(Kernel("multiquadric", 2.0).d1_over_r(0.0)) == pytest.approx(0.5, abs=1e-15)
    rng = np.random.default_rng(7)
    for _ in range(100):
        family = FAMILIES[rng.integers(len(FAMILIES))]
        kk = Kernel(family, float(rng.uniform(0.3, 2.0)))
        delta = rng.normal(0, 0.8, 3)
        r = np.linalg.norm(delta)
        np.testing.assert_allclose(kk.grad(delta), float(kk.d1_over_r(r)) * delta,
                                   atol=1e-12, rtol=1e-12)


def test_radial_vector():
    rv = RadialVector.from_points([1.0, 2.0, 2.0], [0.0, 0.0, 0.0])
    assert rv.r == pytest.approx(3.0)
    assert abs(np.linalg.norm(rv.unit) - 1.0) <= 1e-12
    k = Kernel("multiquadric", 4.0)
    np.testing.assert_allclose(spatial_grad(k, rv), k.grad(rv.delta))
    np.testing.assert_allclose(spatial_hess(k, rv), k.hess(rv.delta))
    at_center = RadialVector.from_points([0.5, 0.5, 0.5], [0.5, 0.5, 0.5])
    assert at_center.unit is None


def test_derivative_consistency_sweep():
    rng = np.random.default_rng(8)
    for family in FAMILIES:
        r0s = rng.uniform(0.2, 3.0, 250)
        rs = rng.uniform(0.0, 4.0, 250)
        for r0, r in zip(r0s, rs):
            k = Kernel(family, float(r0))
            h = 1e-6
            lo = max(r - h, 0.0)
            fd1v = (float(k.value(r + h)) - float(k.value(lo))) / (r + h - lo)
            d1 = float(k.d1(0.5 * (r + h + lo)))
            assert abs(d1 - fd1v) <= 1e-7 * max(1.0, abs(d1))
            if r > h:
                fd2v = (float(k.d1(r + h)) - float(k.d1(r - h))) / (2 * h)
                d2 = float(k.d2(r))
                assert abs(d2 - fd2v) <= 1e-6 * max(1.0, abs(d2))


def test_continuity_at_center():
    for family in FAMILIES:
        k = Kernel(family, 0.9)
        pairs = [
            (float(k.value(1e-9)), float(k.value(0.0))),
            (float(k.d1(1e-9)), float(k.d1(0.0))),
            (float(k.d2(1e-9)), float(k.d2(0.0))),
            (float(k.d1_over_r(1e-9)), float(k.d1_over_r(0.0))),
        ]
        tiny = np.array([1e-9, 0.0, 0.0])
        pairs.append((k.hess(tiny)[0, 0], k.hess(np.zeros(3))[0, 0]))
        for near, at in pairs:
            assert abs(near - at) <= 1e-6 * max(1.0, abs(at))


def test_kernel_validation():
    with pytest.raises(ValueError):
        Kernel("polyharmonic", 1.0)
    with pytest.raises(ValueError):
        Kernel("gaussian", 0.0)
    with pytest.raises(ValueError):
        Kernel("gaussian", -2.0)

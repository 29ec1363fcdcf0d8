import numpy as np
import pytest

from torusgp.kernels import (
    BaselineKernelParams,
    HvmHyperparams,
    HvmKernel,
    ProductPeriodicKernel,
    ProductSqExpKernel,
    ProductVonMisesKernel,
    VmHyperparams,
    component_distances,
    gram,
    k_hvm,
    k_pprd,
    k_pse,
    k_pvm,
    k_vm,
    kernel_from_family,
    pair_order,
)
from torusgp.manifold import TorusPoint, circle_from_angle


def _random_inputs(rng, n, m):
    theta = rng.uniform(0, 2 * np.pi, (n, m))
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def test_pair_order_adjacent_pairs_first():
    assert pair_order(2) == [(0, 1)]
    assert pair_order(3) == [(0, 1), (1, 2), (0, 2)]
    assert pair_order(4) == [(0, 1), (1, 2), (2, 3), (0, 2), (1, 3), (0, 3)]


def test_k_vm_at_coincident_points():
    p = VmHyperparams(omega=2.0, lam=1.5)
    u = circle_from_angle(0.3)
    assert k_vm(u, u, p) == pytest.approx(4.0 * np.exp(1.5), rel=1e-15)


def test_k_vm_requires_positive_concentration():
    with pytest.raises(ValueError):
        VmHyperparams(omega=1.0, lam=0.0)


def test_k_hvm_all_ones_value():
    p = HvmHyperparams(1.0, (1.0, 1.0, 1.0), (1.0, 1.0, 1.0))
    u = TorusPoint.from_angles([0.0, 0.0, 0.0])
    # exponent = sum(lam) + 2 * sum(corr) = 3 + 6
    assert k_hvm(u, u, p) == pytest.approx(np.exp(9.0), rel=1e-14)


def test_k_hvm_quadratic_term_uses_pair_products():
    p = HvmHyperparams(1.0, (0.0, 0.0, 0.0), (0.5, 0.0, 0.0))
    u = TorusPoint.from_angles([0.0, 0.0, 1.0])
    v = TorusPoint.from_angles([1.0, 0.5, 1.0])
    d1, d2 = np.cos(1.0), np.cos(0.5)
    assert k_hvm(u, v, p) == pytest.approx(np.exp(2 * 0.5 * d1 * d2), rel=1e-13)


def test_hvm_corr_length_checked():
    with pytest.raises(ValueError):
        HvmHyperparams(1.0, (1.0, 1.0, 1.0), (0.1,))


def test_interaction_matrix_is_hollow_symmetric():
    p = HvmHyperparams(1.0, (1.0, 1.0, 1.0), (0.1, 0.2, 0.3))
    L = p.interaction_matrix()
    assert np.allclose(L, L.T)
    assert np.all(np.diag(L) == 0.0)
    assert L[0, 1] == 0.1 and L[1, 2] == 0.2 and L[0, 2] == 0.3


def test_k_pse_uses_chart_difference():
    p = BaselineKernelParams(omega=(1.0, 1.0), scale=(2.0, 2.0))
    u = TorusPoint.from_angles([0.1, 0.0])
    v = TorusPoint.from_angles([6.2, 0.0])
    # chart angles 0.1 and 6.2 differ by 6.1, not by the short way around
    expected = np.exp(-(6.1**2) / (2 * 4.0))
    assert k_pse(u, v, p) == pytest.approx(expected, rel=1e-12)


def test_k_pprd_equals_inner_product_form():
    rng = np.random.default_rng(0)
    p = BaselineKernelParams(omega=(1.3, 0.7), scale=(0.9, 1.8))
    for _ in range(20):
        a, b = rng.uniform(0, 2 * np.pi, 2), rng.uniform(0, 2 * np.pi, 2)
        u, v = TorusPoint.from_angles(a), TorusPoint.from_angles(b)
        direct = k_pprd(u, v, p)
        prod = 1.0
        for s in range(2):
            prod *= p.omega[s] ** 2 * np.exp((np.cos(a[s] - b[s]) - 1.0) / p.scale[s] ** 2)
        assert direct == pytest.approx(prod, rel=1e-12)


def test_k_pvm_is_product_of_circle_kernels():
    p = BaselineKernelParams(omega=(1.2, 0.8), scale=(0.5, 1.5))
    u = TorusPoint.from_angles([0.3, 2.0])
    v = TorusPoint.from_angles([1.1, 5.0])
    prod = 1.0
    for s in range(2):
        prod *= k_vm(
            circle_from_angle(u.angles[s]),
            circle_from_angle(v.angles[s]),
            VmHyperparams(p.omega[s], p.scale[s]),
        )
    assert k_pvm(u, v, p) == pytest.approx(prod, rel=1e-12)


def test_component_distances_shape_and_values():
    rng = np.random.default_rng(2)
    A = _random_inputs(rng, 4, 3)
    B = _random_inputs(rng, 5, 3)
    D = component_distances(A, B)
    assert D.shape == (3, 4, 5)
    for s in range(3):
        for i in range(4):
            for j in range(5):
                assert D[s, i, j] == pytest.approx(A[i, s] @ B[j, s], abs=1e-14)


def test_gram_matches_scalar_kernel():
    rng = np.random.default_rng(7)
    X = _random_inputs(rng, 6, 3)
    params = HvmHyperparams(1.4, (0.7, 0.3, 1.1), (0.2, 0.05, 0.4))
    kernel = HvmKernel(params)
    K = kernel.gram(X, X)
    pts = [TorusPoint.from_array(row) for row in X]
    for i in range(6):
        for j in range(6):
            assert K[i, j] == pytest.approx(k_hvm(pts[i], pts[j], params), rel=1e-12)
    K2 = gram(X, X, kernel)
    assert np.allclose(K, K2, atol=0)


def test_hvm_gram_symmetry_and_diag():
    rng = np.random.default_rng(9)
    X = _random_inputs(rng, 10, 2)
    kernel = HvmKernel(HvmHyperparams(0.9, (1.0, 2.0), (0.3,)))
    K = kernel.gram(X, X)
    assert np.allclose(K, K.T, atol=1e-15)
    assert np.allclose(np.diag(K), kernel.prior_variance(), rtol=1e-13)


def test_theta_roundtrip_all_families():
    rng = np.random.default_rng(21)
    for family in ("hvm", "pvm", "pprd", "pse"):
        kernel = kernel_from_family(family, 3)
        theta = kernel.theta
        assert len(theta) == len(kernel.theta_names)
        bumped = kernel.with_theta(theta * 1.1)
        assert np.allclose(bumped.theta, theta * 1.1, rtol=1e-14)
        X = _random_inputs(rng, 4, 3)
        K = bumped.gram(X, X)
        assert K.shape == (4, 4)
        assert np.all(np.isfinite(K))


def test_hvm_theta_names():
    kernel = kernel_from_family("hvm", 3)
    assert kernel.theta_names == (
        "omega",
        "lam_1",
        "lam_2",
        "lam_3",
        "corr_12",
        "corr_23",
        "corr_13",
    )


def test_gram_and_partials_match_finite_differences():
    rng = np.random.default_rng(31)
    X = _random_inputs(rng, 7, 3)
    h = 1e-6
    for family in ("hvm", "pvm", "pprd", "pse"):
        kernel = kernel_from_family(family, 3)
        kernel = kernel.with_theta(kernel.theta * rng.uniform(0.8, 1.2, kernel.theta.size))
        K, partials = kernel.gram_and_partials(X)
        assert np.allclose(K, kernel.gram(X, X), atol=1e-14)
        assert len(partials) == kernel.theta.size
        for idx in range(kernel.theta.size):
            up = kernel.theta.copy()
            dn = kernel.theta.copy()
            up[idx] += h
            dn[idx] -= h
            fd = (kernel.with_theta(up).gram(X, X) - kernel.with_theta(dn).gram(X, X)) / (2 * h)
            assert np.max(np.abs(partials[idx] - fd)) < 1e-6, (family, kernel.theta_names[idx])


def test_hvm_with_zero_corr_matches_pvm():
    rng = np.random.default_rng(13)
    X = _random_inputs(rng, 8, 3)
    hvm = HvmKernel(HvmHyperparams(1.3, (0.6, 1.1, 0.4), (0.0, 0.0, 0.0)))
    pvm = ProductVonMisesKernel(1.3, (0.6, 1.1, 0.4))
    assert np.max(np.abs(hvm.gram(X, X) - pvm.gram(X, X))) < 1e-14


def test_pse_kernel_is_chart_aperiodic():
    # same circle point approached from the two chart sides
    p = ProductSqExpKernel(1.0, (1.0,))
    lo = np.array([[[np.cos(1e-3), np.sin(1e-3)]]])
    hi = np.array([[[np.cos(2 * np.pi - 1e-3), np.sin(2 * np.pi - 1e-3)]]])
    k = p.gram(lo, hi)[0, 0]
    # chart distance is ~2 pi - 2e-3, so similarity is essentially zero
    assert k < 1e-8


def test_periodic_kernel_wraps():
    p = ProductPeriodicKernel(1.0, (1.0,))
    lo = np.array([[[np.cos(1e-3), np.sin(1e-3)]]])
    hi = np.array([[[np.cos(2 * np.pi - 1e-3), np.sin(2 * np.pi - 1e-3)]]])
    assert p.gram(lo, hi)[0, 0] == pytest.approx(1.0, abs=1e-5)

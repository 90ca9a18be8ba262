import numpy as np
import pytest

import oracles
from helpers import smooth_field
from spdflow.geometry import DomainError, christoffel, vech
from spdflow.immersion import (
    TensorField,
    beltrami_magnitude,
    beltrami_quadratic_form,
    channel_gradient,
    christoffel_term,
    induced_metric,
    laplace_beltrami,
    local_geometry,
    mean_curvature,
)


def constant_field(dims=(6, 5), P=None):
    P = np.diag([3.0, 1.0, 2.0]) if P is None else P
    return TensorField(np.broadcast_to(vech(P), dims + (6,)).copy())


def ramp_field(t, n=5, dims2=5, channel=0, base=np.eye(3)):
    """Field equal to ``base`` at the centre row, channel ramping with slope t along axis 0."""
    data = np.broadcast_to(vech(base), (n, dims2, 6)).copy()
    x = np.arange(n) - n // 2
    data[..., channel] += t * x[:, None]
    return TensorField(data)


class TestTensorField:
    def test_shape_validation(self):
        with pytest.raises(ValueError):
            TensorField(np.zeros((4, 4, 5)))
        with pytest.raises(ValueError):
            TensorField(np.zeros((2, 4, 6)))
        with pytest.raises(ValueError):
            TensorField(np.zeros((4, 4, 6)), spacing=(1.0, -1.0))

    def test_defaults(self):
        f = constant_field((4, 5))
        assert f.ndim == 2 and f.dims == (4, 5) and f.spacing == (1.0, 1.0)
        assert f.n_voxels == 20

    def test_matrices_roundtrip(self):
        f = smooth_field((4, 4, 3))
        np.testing.assert_array_equal(TensorField.from_matrices(f.matrices()).data, f.data)


class TestChannelGradient:
    def test_constant(self):
        assert not np.any(channel_gradient(constant_field()))

    def test_ramp_interior(self):
        f = ramp_field(1.0, base=5 * np.eye(3))
        g = channel_gradient(f, (2, 2))
        np.testing.assert_array_equal(g[:, 0], [1, 0, 0, 0, 0, 0])
        np.testing.assert_array_equal(g[:, 1], 0)

    def test_ramp_boundary_uses_replicate_ghost(self):
        f = ramp_field(1.0, base=5 * np.eye(3))
        # ghost value equals the boundary value: (p[1] - p[0]) / 2
        assert channel_gradient(f, (0, 2))[0, 0] == 0.5
        assert channel_gradient(f, (4, 2))[0, 0] == 0.5

    def test_spacing(self):
        f = ramp_field(1.0, base=5 * np.eye(3))
        f = TensorField(f.data, (0.5, 2.0))
        assert channel_gradient(f, (2, 2))[0, 0] == 2.0

    def test_full_grid_shape(self):
        assert channel_gradient(smooth_field((4, 5, 6))).shape == (4, 5, 6, 6, 3)


class TestInducedMetric:
    def test_constant(self):
        im = induced_metric(constant_field(), (1, 1))
        np.testing.assert_array_equal(im.gamma, np.eye(2))
        assert im.det == 1.0

    @pytest.mark.parametrize("t", [0.1, 0.3, -0.2])
    def test_single_channel_ramp(self, t):
        im = induced_metric(ramp_field(t), (2, 2))
        np.testing.assert_allclose(im.gamma, np.diag([1 + t * t, 1.0]), rtol=1e-14)
        np.testing.assert_allclose(im.inverse @ im.gamma, np.eye(2), atol=1e-14)

    def test_psd_excess(self):
        f = smooth_field((6, 7, 5), amp=2.0)
        im = induced_metric(f)
        lam = np.linalg.eigvalsh(im.gamma - np.eye(3))
        assert lam.min() >= -1e-12
        assert np.all(im.det >= 1 - 1e-12)
        np.testing.assert_allclose(im.gamma @ im.inverse, np.broadcast_to(np.eye(3), im.gamma.shape), atol=1e-10)

    def test_matches_oracle(self):
        f = smooth_field((4, 5, 4))
        _, gam, ginv, det = oracles.geometry(f.data, f.spacing)
        im = induced_metric(f)
        np.testing.assert_allclose(im.gamma, gam, atol=1e-12)
        np.testing.assert_allclose(im.det, det, rtol=1e-12)

    def test_rejects_non_spd(self):
        f = constant_field()
        f.data[2, 2] = vech(np.diag([1.0, -1.0, 1.0]))
        with pytest.raises(DomainError):
            induced_metric(f)


class TestLaplaceBeltrami:
    def test_constant_exact_zero(self):
        assert not np.any(laplace_beltrami(constant_field((5, 5, 5))))

    def test_euclidean_limit(self):
        eps = 1e-8
        n = 7
        data = np.broadcast_to(vech(np.eye(3)), (n, n, 6)).copy()
        x = np.arange(n, dtype=float)
        data[..., 3] = eps * x[:, None] ** 2
        lb = laplace_beltrami(TensorField(data), channel=3)
        np.testing.assert_allclose(lb[1:-1] / eps, 2.0, atol=1e-10)

    @pytest.mark.parametrize("dims", [(6, 7), (5, 6, 7)])
    def test_flat_metric_hook_is_standard_laplacian(self, dims, rng):
        m = len(dims)
        grids = np.meshgrid(*[np.arange(n, dtype=float) for n in dims], indexing="ij")
        data = np.zeros(dims + (6,))
        for ch in range(6):
            c = rng.normal(size=(m, m))
            b = rng.normal(size=m)
            data[..., ch] = 10 + sum(b[a] * grids[a] for a in range(m)) + sum(
                c[a, bb] * grids[a] * grids[bb] for a in range(m) for bb in range(m))
        f = TensorField(data)
        zero = lambda p: np.zeros(p.shape[:-1] + (6, 6))  # noqa: E731
        lb = laplace_beltrami(f, geometry=local_geometry(f, metric=zero))
        stencil = -2 * m * data
        for a in range(m):
            stencil = stencil + np.roll(data, 1, axis=a) + np.roll(data, -1, axis=a)
        inner = tuple(slice(1, -1) for _ in range(m))
        np.testing.assert_allclose(lb[inner], stencil[inner], atol=1e-10)

    def test_brute_force_oracle(self):
        f = smooth_field((5, 5, 5))
        np.testing.assert_allclose(laplace_beltrami(f), oracles.laplace_beltrami(f.data, f.spacing),
                                   rtol=0, atol=1e-10)

    def test_channel_and_voxel_selection(self):
        f = smooth_field((4, 5))
        full = laplace_beltrami(f)
        assert laplace_beltrami(f, channel=2, voxel=(1, 3)) == full[1, 3, 2]


class TestMeanCurvature:
    def test_constant_exact_zero(self):
        assert not np.any(mean_curvature(constant_field((4, 4, 4))))

    def test_christoffel_term_isolated(self):
        f = smooth_field((5, 6), amp=1.5)
        geo = local_geometry(f)
        gam_term = f.ndim * mean_curvature(f, geometry=geo) - laplace_beltrami(f, geometry=geo)
        grad, _, ginv, _ = oracles.geometry(f.data, f.spacing)
        ref = np.zeros(f.data.shape)
        for idx in np.ndindex(*f.dims):
            G = oracles.christoffel_geodesic(f.matrices()[idx])
            ref[idx] = np.einsum("ijk,ja,ab,kb->i", G, grad[idx], ginv[idx], grad[idx])
        np.testing.assert_allclose(gam_term, ref, atol=1e-10)
        np.testing.assert_allclose(christoffel_term(f), ref, atol=1e-10)

    def test_dense_oracle(self):
        f = smooth_field((5, 5, 5))
        np.testing.assert_allclose(mean_curvature(f), oracles.mean_curvature(f.data, f.spacing),
                                   rtol=0, atol=1e-10)

    def test_mirror_symmetry(self):
        f = smooth_field((6, 7, 5), amp=1.3)
        H = mean_curvature(f)
        for axis in range(3):
            g = TensorField(np.flip(f.data, axis=axis).copy(), f.spacing)
            np.testing.assert_allclose(mean_curvature(g), np.flip(H, axis=axis), atol=1e-12)

    def test_uses_supplied_christoffels(self):
        f = smooth_field((4, 4))
        np.testing.assert_array_equal(christoffel_term(f, gamma_symbols=np.zeros((4, 4, 6, 6, 6))), 0)
        np.testing.assert_allclose(christoffel_term(f, gamma_symbols=christoffel(f.matrices())),
                                   christoffel_term(f))


class TestBeltramiMagnitude:
    def test_constant(self):
        assert not np.any(beltrami_magnitude(constant_field()))

    @pytest.mark.parametrize("t", [0.1, 0.5, -2.0])
    def test_single_channel_ramp(self, t):
        f = ramp_field(t, base=np.eye(3) * (1 if abs(t) < 0.4 else 10))
        G11 = 1.0 / f.matrices()[2, 2, 0, 0] ** 2
        q = G11 * t * t
        assert beltrami_quadratic_form(f, (2, 2)) == pytest.approx(q / (1 + q), rel=1e-13)
        assert beltrami_magnitude(f, (2, 2)) == pytest.approx(np.sqrt(q / (1 + q)), rel=1e-13)

    def test_nonnegative_and_bounded(self, rng):
        for amp in (0.1, 1.0, 3.0):
            f = smooth_field((5, 6, 4), amp=amp)
            b = beltrami_magnitude(f)
            assert np.all(b >= 0)
            # q = m - trace(gamma^-1) < m
            assert np.all(b ** 2 < f.ndim)

    def test_oracle(self):
        f = smooth_field((4, 5, 4), amp=2.0)
        np.testing.assert_allclose(beltrami_magnitude(f), oracles.beltrami_magnitude(f.data, f.spacing),
                                   atol=1e-12)

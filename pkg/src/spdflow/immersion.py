"""Discrete differential operators of a tensor image viewed as an immersion.

A field of SPD matrices over an m-dimensional grid is the graph
``x -> (x, vech P(x))`` inside the product of Euclidean space with P(3).
The domain inherits the pull-back metric

    gamma = I_m + (grad p)^T G(p) (grad p)

and the mean curvature of the graph drives every flow in
:mod:`spdflow.flows`.

Array conventions
-----------------
``TensorField.data`` has shape ``(*dims, 6)``: spatial axes first (in
file order, i.e. ``(z, y, x)`` or ``(y, x)``), vech channel last.  Spatial
derivative index ``alpha`` follows the array axes.  Boundaries are
Neumann: every stencil reads replicate-padded neighbours.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable, NamedTuple, Optional

import numpy as np

from .geometry import christoffel, metric_tensor, spd_check, unvech, vech

__all__ = [
    "TensorField",
    "InducedMetric",
    "LocalGeometry",
    "local_geometry",
    "channel_gradient",
    "induced_metric",
    "laplace_beltrami",
    "christoffel_term",
    "mean_curvature",
    "beltrami_quadratic_form",
    "beltrami_magnitude",
    "central_difference",
]

MetricFn = Callable[[np.ndarray], np.ndarray]


@dataclass
class TensorField:
    """Grid of 3 x 3 SPD matrices stored as vech channels.

    Parameters
    ----------
    data : ndarray, shape (*dims, 6)
        Channel array in vech order ``[P11, P22, P33, P12, P23, P13]``.
    spacing : tuple of float, optional
        Voxel size along each spatial axis; defaults to 1.

    Positive definiteness is not checked here (see :meth:`check_spd`), so
    that damaged fields can still be represented and inspected.
    """

    data: np.ndarray
    spacing: tuple = dc_field(default=None)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim not in (3, 4) or self.data.shape[-1] != 6:
            raise ValueError(
                f"field data must have shape (*dims, 6) with 2 or 3 spatial axes, "
                f"got {self.data.shape}"
            )
        if min(self.dims) < 3:
            raise ValueError(f"every grid extent must be >= 3, got dims {self.dims}")
        if self.spacing is None:
            self.spacing = (1.0,) * self.ndim
        self.spacing = tuple(float(h) for h in self.spacing)
        if len(self.spacing) != self.ndim or not all(h > 0 for h in self.spacing):
            raise ValueError(f"spacing must hold {self.ndim} positive values, got {self.spacing}")

    @property
    def dims(self) -> tuple:
        return self.data.shape[:-1]

    @property
    def ndim(self) -> int:
        """Number of spatial dimensions m."""
        return self.data.ndim - 1

    @property
    def n_voxels(self) -> int:
        return int(np.prod(self.dims))

    @property
    def voxel_volume(self) -> float:
        return float(np.prod(self.spacing))

    def matrices(self) -> np.ndarray:
        """Full matrices, shape ``(*dims, 3, 3)``."""
        return unvech(self.data)

    @classmethod
    def from_matrices(cls, P, spacing=None) -> "TensorField":
        return cls(vech(P), spacing)

    def copy(self) -> "TensorField":
        return TensorField(self.data.copy(), self.spacing)

    def with_data(self, data) -> "TensorField":
        return TensorField(data, self.spacing)

    def check_spd(self):
        """Per-voxel ``(is_spd, min_eigenvalue)`` arrays over the grid."""
        return spd_check(self.matrices())


class InducedMetric(NamedTuple):
    gamma: np.ndarray
    inverse: np.ndarray
    det: np.ndarray


class LocalGeometry(NamedTuple):
    """Per-voxel quantities shared by all operators within one time step."""

    grad: np.ndarray       # (*dims, 6, m)
    G: np.ndarray          # (*dims, 6, 6)
    gamma: np.ndarray      # (*dims, m, m)
    gamma_inv: np.ndarray  # (*dims, m, m)
    det_gamma: np.ndarray  # (*dims,)


###############################################################################
# Stencils


def _shift(a, axis, step):
    """Neighbour values ``a[i + step]`` along ``axis`` with replicate padding."""
    n = a.shape[axis]
    idx = np.clip(np.arange(n) + step, 0, n - 1)
    return np.take(a, idx, axis=axis)


def central_difference(a, axis, h):
    """Centred first difference along a spatial axis, replicate boundary.

    At a boundary voxel the ghost neighbour equals the voxel itself, so the
    result is the one-sided difference halved.
    """
    return (_shift(a, axis, 1) - _shift(a, axis, -1)) / (2.0 * h)


def _gradient(data, spacing):
    m = len(spacing)
    return np.stack([central_difference(data, a, spacing[a]) for a in range(m)], axis=-1)


def _default_metric(p):
    return metric_tensor(unvech(p))


def local_geometry(field: TensorField, metric: Optional[MetricFn] = None) -> LocalGeometry:
    """Gradients, target metric and induced metric at every voxel.

    ``metric`` replaces the P(3) metric tensor; it receives the vech data
    array and must return ``(*dims, 6, 6)``.  It exists as a test hook
    (e.g. a zero metric gives the flat domain metric).
    """
    metric = metric or _default_metric
    grad = _gradient(field.data, field.spacing)
    G = metric(field.data)
    m = field.ndim
    gamma = np.eye(m) + np.einsum("...ia,...ij,...jb->...ab", grad, G, grad)
    gamma = 0.5 * (gamma + np.swapaxes(gamma, -1, -2))
    det = np.linalg.det(gamma)
    gamma_inv = np.linalg.inv(gamma)
    return LocalGeometry(grad, G, gamma, gamma_inv, det)


def _at(arr, voxel):
    return arr if voxel is None else arr[tuple(voxel)]


###############################################################################
# Operators


def channel_gradient(field: TensorField, voxel=None) -> np.ndarray:
    """Spatial derivatives of the six channels, shape ``(..., 6, m)``.

    Column ``alpha`` holds the derivative along array axis ``alpha``.
    With ``voxel=None`` the whole grid is returned.
    """
    return _at(_gradient(field.data, field.spacing), voxel)


def induced_metric(field: TensorField, voxel=None, geometry: Optional[LocalGeometry] = None) -> InducedMetric:
    """Pull-back metric ``gamma = I + grad^T G grad`` with inverse and determinant."""
    geo = geometry or local_geometry(field)
    return InducedMetric(_at(geo.gamma, voxel), _at(geo.gamma_inv, voxel), _at(geo.det_gamma, voxel))


def _laplace_beltrami_all(field: TensorField, geo: LocalGeometry) -> np.ndarray:
    """Delta_M applied to all six channels on the whole grid."""
    u = field.data
    h = field.spacing
    m = field.ndim
    sqrt_det = np.sqrt(geo.det_gamma)
    A = sqrt_det[..., None, None] * geo.gamma_inv
    out = np.zeros_like(u)
    for a in range(m):
        # diagonal part: conservative flux with face-averaged coefficients
        Aaa = A[..., a, a][..., None]
        up, um = _shift(u, a, 1), _shift(u, a, -1)
        Ap, Am = _shift(Aaa, a, 1), _shift(Aaa, a, -1)
        flux_p = 0.5 * (Aaa + Ap) * (up - u)
        flux_m = 0.5 * (Aaa + Am) * (u - um)
        out += (flux_p - flux_m) / (h[a] * h[a])
        # mixed part: centred difference of the cell-centred flux
        for b in range(m):
            if b == a:
                continue
            F = A[..., a, b][..., None] * geo.grad[..., b]
            out += central_difference(F, a, h[a])
    return out / sqrt_det[..., None]


def laplace_beltrami(field: TensorField, channel=None, voxel=None,
                     geometry: Optional[LocalGeometry] = None) -> np.ndarray:
    """Laplace-Beltrami operator of the induced metric applied to channels.

    Discretised in divergence form,
    ``(1/sqrt(det g)) d_a (sqrt(det g) g^{ab} d_b u)``.
    Diagonal terms use face-averaged coefficients; mixed terms use centred
    differences of the voxel-centred flux (the 4-point corner stencil when
    the coefficient is constant).

    Parameters
    ----------
    channel : int, optional
        vech channel (0-based).  All six when omitted.
    voxel : tuple of int, optional
        Grid index.  Whole grid when omitted.
    """
    geo = geometry or local_geometry(field)
    out = _laplace_beltrami_all(field, geo)
    if channel is not None:
        out = out[..., channel]
    return _at(out, voxel)


def christoffel_term(field: TensorField, geometry: Optional[LocalGeometry] = None,
                     gamma_symbols=None) -> np.ndarray:
    """``gamma^{ab} Gamma^i_{jk} d_a p^j d_b p^k`` at every voxel, shape ``(*dims, 6)``."""
    geo = geometry or local_geometry(field)
    if gamma_symbols is None:
        gamma_symbols = christoffel(field.matrices())
    M = np.einsum("...ja,...ab,...kb->...jk", geo.grad, geo.gamma_inv, geo.grad)
    return np.einsum("...ijk,...jk->...i", gamma_symbols, M)


def _mean_curvature_all(field, geo):
    return (_laplace_beltrami_all(field, geo) + christoffel_term(field, geo)) / field.ndim


def mean_curvature(field: TensorField, voxel=None, geometry: Optional[LocalGeometry] = None) -> np.ndarray:
    """Tensor-channel components of the mean curvature vector.

    ``H^i = (Delta_M p^i + gamma^{ab} Gamma^i_{jk} d_a p^j d_b p^k) / m``.
    The spatial components of the graph are not evolved and are not
    returned.
    """
    geo = geometry or local_geometry(field)
    return _at(_mean_curvature_all(field, geo), voxel)


def beltrami_quadratic_form(field: TensorField, voxel=None,
                            geometry: Optional[LocalGeometry] = None) -> np.ndarray:
    """``gamma^{ab} g_ij d_a p^i d_b p^j``, equal to ``m - trace(gamma^-1)``."""
    geo = geometry or local_geometry(field)
    pulled = geo.gamma - np.eye(field.ndim)
    q = np.einsum("...ab,...ab->...", geo.gamma_inv, pulled)
    if np.any(q < -1e-12):
        raise RuntimeError(f"negative Beltrami quadratic form {q.min():.3g}; induced metric inverse is broken")
    return _at(np.maximum(q, 0.0), voxel)


def beltrami_magnitude(field: TensorField, voxel=None,
                       geometry: Optional[LocalGeometry] = None) -> np.ndarray:
    """Square root of :func:`beltrami_quadratic_form`; zero where the field is locally constant."""
    return np.sqrt(beltrami_quadratic_form(field, voxel, geometry))

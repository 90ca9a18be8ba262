"""Error statistics and energies for SPD tensor fields."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .geometry import check_domain, spd_check
from .immersion import TensorField, local_geometry

__all__ = [
    "ErrorReport",
    "geodesic_distance",
    "field_error",
    "volume_energy",
    "spd_violations",
]


@dataclass(frozen=True)
class ErrorReport:
    riemannian_mse: float
    frobenius_mse: float
    max_pointwise: float
    spd_violation_count: int

    def to_text(self) -> str:
        """Flat ``key=value`` lines."""
        return "".join(f"{key}={value!r}\n" for key, value in asdict(self).items())

    @classmethod
    def from_text(cls, text: str) -> "ErrorReport":
        values = dict(line.split("=", 1) for line in text.splitlines() if line.strip())
        return cls(
            riemannian_mse=float(values["riemannian_mse"]),
            frobenius_mse=float(values["frobenius_mse"]),
            max_pointwise=float(values["max_pointwise"]),
            spd_violation_count=int(values["spd_violation_count"]),
        )


def geodesic_distance(P, Q):
    r"""Affine-invariant geodesic distance between SPD matrices.

    .. math:: d(P, Q) = \| \log(P^{-1/2} Q P^{-1/2}) \|_F

    Broadcasts over leading axes.  Identical inputs give exactly zero.
    """
    P = check_domain(P)
    Q = check_domain(Q)
    lam, V = np.linalg.eigh(P)
    W = V / np.sqrt(lam)[..., None, :]
    M = np.swapaxes(W, -1, -2) @ Q @ W
    M = 0.5 * (M + np.swapaxes(M, -1, -2))
    mu = np.linalg.eigvalsh(M)
    d = np.sqrt(np.sum(np.log(mu) ** 2, axis=-1))
    same = np.all(P == Q, axis=(-2, -1))
    return np.where(same, 0.0, d)


def field_error(f: TensorField, reference: TensorField) -> ErrorReport:
    """Voxelwise distances of ``f`` from ``reference``, aggregated over the grid.

    ``spd_violation_count`` counts violations in ``f``; voxels that are not
    SPD are left out of the geodesic statistics.
    """
    if f.dims != reference.dims:
        raise ValueError(f"dimension mismatch: {f.dims} vs {reference.dims}")
    P = f.matrices().reshape(-1, 3, 3)
    R = reference.matrices().reshape(-1, 3, 3)
    ok_f, _ = spd_check(P)
    ok_r, _ = spd_check(R)
    ok = ok_f & ok_r
    d = np.zeros(len(P))
    if np.any(ok):
        d[ok] = geodesic_distance(P[ok], R[ok])
    diff = P - R
    frob2 = np.sum(diff * diff, axis=(-2, -1))
    return ErrorReport(
        riemannian_mse=float(np.mean(d * d)),
        frobenius_mse=float(np.mean(frob2)),
        max_pointwise=float(d.max()),
        spd_violation_count=int(np.count_nonzero(~ok_f)),
    )


def volume_energy(field: TensorField, geometry=None) -> float:
    """Discrete area/volume of the graph, ``sum(sqrt(det gamma)) * voxel volume``."""
    geo = geometry or local_geometry(field)
    return float(np.sqrt(geo.det_gamma).sum() * field.voxel_volume)


def spd_violations(field: TensorField):
    """Number of non-SPD voxels and the smallest eigenvalue in the field."""
    ok, lam = field.check_spd()
    return int(np.count_nonzero(~ok)), float(lam.min())

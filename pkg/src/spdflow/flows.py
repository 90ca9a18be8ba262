"""Curvature-driven flows for SPD tensor fields.

Four explicit (forward Euler) evolutions of the six vech channels:

=================  =====================================================
``tv``             ``p_t = H``
``rmc``            ``p_t = |grad p| H``
``modified_rmc``   ``p_t = c(K * |grad p|) |grad p| H``
``self_snakes``    ``p_t = c(K * |grad p|) |grad p| H + grad c . grad p``
=================  =====================================================

``H`` is the mean curvature vector of the field's graph, ``|grad p|`` the
Beltrami gradient magnitude, ``K *`` Gaussian smoothing of the magnitude
field and ``c(s) = k^2 / (k^2 + s^2)`` the edge-stopping function.  After
each Euler step an SPD safeguard repairs any voxel that left the cone.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np
from scipy import ndimage

from .geometry import unvech, vech
from .immersion import (
    LocalGeometry,
    TensorField,
    _mean_curvature_all,
    beltrami_magnitude,
    central_difference,
    local_geometry,
)
from .metrics import volume_energy

__all__ = [
    "FLOW_KINDS",
    "SAFEGUARDS",
    "FlowConfig",
    "FlowDiagnostics",
    "SPDViolationError",
    "FlowInstabilityError",
    "edge_stopping_c",
    "gaussian_smooth",
    "default_k",
    "flow_rhs",
    "spd_safeguard",
    "tv_step",
    "rmc_step",
    "modified_rmc_step",
    "self_snakes_step",
    "run_flow",
]

FLOW_KINDS = ("tv", "rmc", "modified_rmc", "self_snakes")
SAFEGUARDS = ("clamp", "reject_step", "strict")
SHOCK_PAIRINGS = ("metric", "euclidean")


class SPDViolationError(ArithmeticError):
    """A time step produced a non-SPD voxel under the ``strict`` safeguard."""

    def __init__(self, message, step=None, count=0):
        super().__init__(message)
        self.step = step
        self.count = count


class FlowInstabilityError(ArithmeticError):
    """The explicit scheme produced non-finite values."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


@dataclass(frozen=True)
class FlowConfig:
    """Parameters of one flow run.

    ``k=None`` selects the median of the smoothed initial Beltrami
    magnitude.  ``seed`` is recorded for reproducibility; the flows
    themselves are deterministic.
    """

    kind: str
    dt: float = 0.01
    steps: int = 50
    k: Optional[float] = None
    sigma: float = 1.0
    safeguard: str = "clamp"
    eig_floor: float = 1e-8
    seed: int = 0
    shock_pairing: str = "metric"

    def __post_init__(self):
        if self.kind not in FLOW_KINDS:
            raise ValueError(f"unknown flow kind {self.kind!r}; expected one of {FLOW_KINDS}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if int(self.steps) != self.steps or self.steps < 0:
            raise ValueError(f"steps must be a non-negative integer, got {self.steps}")
        if self.k is not None and not self.k > 0:
            raise ValueError(f"k must be positive, got {self.k}")
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be non-negative, got {self.sigma}")
        if self.safeguard not in SAFEGUARDS:
            raise ValueError(f"unknown safeguard {self.safeguard!r}; expected one of {SAFEGUARDS}")
        if not self.eig_floor > 0:
            raise ValueError(f"eig_floor must be positive, got {self.eig_floor}")
        if self.shock_pairing not in SHOCK_PAIRINGS:
            raise ValueError(f"unknown shock pairing {self.shock_pairing!r}")


@dataclass
class FlowDiagnostics:
    """Per-step records of a flow run (one entry per executed step)."""

    k: Optional[float] = None
    initial_energy: Optional[float] = None
    energy: list = dc_field(default_factory=list)
    max_abs_H: list = dc_field(default_factory=list)
    safeguard_activations: list = dc_field(default_factory=list)
    min_eigenvalue: list = dc_field(default_factory=list)
    wall_time: list = dc_field(default_factory=list)

    def __len__(self):
        return len(self.energy)

    @property
    def total_activations(self) -> int:
        return int(sum(self.safeguard_activations))


###############################################################################
# Building blocks


def edge_stopping_c(s, k):
    """Edge-stopping weight ``k^2 / (k^2 + s^2)``, in (0, 1]."""
    s = np.asarray(s, dtype=float)
    if not k > 0:
        raise ValueError(f"k must be positive, got {k}")
    k2 = float(k) ** 2
    return k2 / (k2 + s * s)


def gaussian_smooth(scalar_field, sigma):
    """Separable Gaussian blur with replicate boundaries.

    The kernel is truncated at three standard deviations and normalised to
    unit sum; ``sigma=0`` returns an unchanged copy.
    """
    a = np.asarray(scalar_field, dtype=float)
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    if sigma == 0:
        return a.copy()
    return ndimage.gaussian_filter(a, sigma, mode="nearest", truncate=3.0)


def default_k(field: TensorField, sigma: float) -> float:
    """Median of the smoothed Beltrami magnitude, or 1 for a flat field."""
    s = gaussian_smooth(beltrami_magnitude(field), sigma)
    k = float(np.median(s))
    return k if k > 0 else 1.0


def _shock_term(c, geo: LocalGeometry, spacing, pairing):
    dc = np.stack([central_difference(c, a, spacing[a]) for a in range(len(spacing))], axis=-1)
    if pairing == "metric":
        dc = np.einsum("...ab,...a->...b", geo.gamma_inv, dc)
    return np.einsum("...ib,...b->...i", geo.grad, dc)


def flow_rhs(field: TensorField, kind: str, k=None, sigma=1.0, shock_pairing="metric",
             geometry: Optional[LocalGeometry] = None):
    """Right-hand side of a flow and the mean curvature it was built from.

    Returns
    -------
    rhs, H : ndarray, shape (*dims, 6)
    """
    if kind not in FLOW_KINDS:
        raise ValueError(f"unknown flow kind {kind!r}")
    geo = geometry or local_geometry(field)
    H = _mean_curvature_all(field, geo)
    if kind == "tv":
        return H, H
    mag = beltrami_magnitude(field, geometry=geo)
    if kind == "rmc":
        return mag[..., None] * H, H
    if k is None:
        raise ValueError(f"flow {kind!r} needs an edge-stopping constant k")
    c = edge_stopping_c(gaussian_smooth(mag, sigma), k)
    rhs = (c * mag)[..., None] * H
    if kind == "self_snakes":
        rhs = rhs + _shock_term(c, geo, field.spacing, shock_pairing)
    return rhs, H


def spd_safeguard(P_new, P_old, policy="clamp", eig_floor=1e-8):
    """Keep matrices inside the SPD cone after an explicit update.

    Parameters
    ----------
    P_new : ndarray, shape (..., 3, 3)
        Updated symmetric matrices.
    P_old : ndarray, shape (..., 3, 3)
        SPD matrices before the update.
    policy : {'clamp', 'reject_step', 'strict'}
        ``clamp`` floors eigenvalues at ``eig_floor * t / 3`` where ``t`` is
        the larger of ``trace(P_old)`` and the summed positive eigenvalues
        of ``P_new``;
        ``reject_step`` restores ``P_old``; ``strict`` raises
        :class:`SPDViolationError` on any non-SPD matrix.
    eig_floor : float
        Relative eigenvalue floor.

    Returns
    -------
    P : ndarray
        Repaired matrices; untouched entries are bitwise equal to ``P_new``.
    activated : ndarray of bool
        Which matrices were modified.
    """
    if policy not in SAFEGUARDS:
        raise ValueError(f"unknown safeguard policy {policy!r}")
    P_new = np.asarray(P_new, dtype=float)
    P_old = np.asarray(P_old, dtype=float)
    lam_all = np.linalg.eigvalsh(P_new)
    lam_min = lam_all[..., 0]
    if policy == "strict":
        bad = ~(lam_min > 0)
        if np.any(bad):
            raise SPDViolationError(
                f"{int(np.count_nonzero(bad))} voxel(s) left the SPD cone "
                f"(smallest eigenvalue {np.nanmin(lam_min):.3g})",
                count=int(np.count_nonzero(bad)),
            )
        return P_new.copy(), np.zeros(lam_min.shape, dtype=bool)
    # a step can inflate the spectrum, so the floor follows whichever is larger
    scale = np.maximum(np.trace(P_old, axis1=-2, axis2=-1), np.clip(lam_all, 0, None).sum(axis=-1))
    floor = eig_floor * scale / 3.0
    activated = ~(lam_min >= floor)
    out = P_new.copy()
    if np.any(activated):
        if policy == "reject_step":
            out[activated] = P_old[activated]
        else:
            lam, V = np.linalg.eigh(P_new[activated])
            lam = np.maximum(lam, floor[activated][..., None])
            out[activated] = (V * lam[..., None, :]) @ np.swapaxes(V, -1, -2)
    return out, activated


def _apply_safeguard(old: TensorField, new_data, policy, eig_floor):
    P_new = unvech(new_data)
    P_old = old.matrices()
    fixed, activated = spd_safeguard(P_new, P_old, policy, eig_floor)
    if np.any(activated):
        new_data = new_data.copy()
        new_data[activated] = vech(fixed[activated])
    return new_data, int(np.count_nonzero(activated))


def _euler_step(field, dt, kind, k=None, sigma=1.0, safeguard="clamp", eig_floor=1e-8,
                shock_pairing="metric", geometry=None):
    rhs, H = flow_rhs(field, kind, k, sigma, shock_pairing, geometry)
    if not np.all(np.isfinite(rhs)):
        raise FlowInstabilityError("non-finite flow update")
    new_data, n_fixed = _apply_safeguard(field, field.data + dt * rhs, safeguard, eig_floor)
    return field.with_data(new_data), n_fixed, H


###############################################################################
# Public steps


def tv_step(field: TensorField, dt: float, *, safeguard="clamp", eig_floor=1e-8) -> TensorField:
    """One Euler step of the total-variation (minimal immersion) flow."""
    return _euler_step(field, dt, "tv", safeguard=safeguard, eig_floor=eig_floor)[0]


def rmc_step(field: TensorField, dt: float, *, safeguard="clamp", eig_floor=1e-8) -> TensorField:
    """One Euler step of the mean curvature flow ``p_t = |grad p| H``."""
    return _euler_step(field, dt, "rmc", safeguard=safeguard, eig_floor=eig_floor)[0]


def modified_rmc_step(field: TensorField, dt: float, k: float, sigma: float, *,
                      safeguard="clamp", eig_floor=1e-8) -> TensorField:
    """One Euler step of the edge-weighted mean curvature flow."""
    return _euler_step(field, dt, "modified_rmc", k, sigma, safeguard, eig_floor)[0]


def self_snakes_step(field: TensorField, dt: float, k: float, sigma: float, *,
                     safeguard="clamp", eig_floor=1e-8, shock_pairing="metric") -> TensorField:
    """One Euler step of the self-snakes flow (diffusion plus shock term).

    The shock term pairs the gradient of the edge weight with the channel
    gradients through the inverse induced metric; ``shock_pairing=
    'euclidean'`` uses the plain dot product instead.
    """
    return _euler_step(field, dt, "self_snakes", k, sigma, safeguard, eig_floor, shock_pairing)[0]


def run_flow(field: TensorField, config: FlowConfig, callback=None):
    """Evolve ``field`` for ``config.steps`` Euler steps.

    Parameters
    ----------
    field : TensorField
        Initial SPD field; left untouched.
    config : FlowConfig
    callback : callable, optional
        Called as ``callback(step, field, diagnostics)`` after every step.

    Returns
    -------
    field : TensorField
    diagnostics : FlowDiagnostics
    """
    diag = FlowDiagnostics()
    if config.steps == 0:
        return field.copy(), diag

    k = config.k
    if k is None and config.kind in ("modified_rmc", "self_snakes"):
        k = default_k(field, config.sigma)
    diag.k = k

    current = field
    geo = local_geometry(current)
    diag.initial_energy = volume_energy(current, geometry=geo)
    for n in range(config.steps):
        t0 = time.perf_counter()
        try:
            current, n_fixed, H = _euler_step(
                current, config.dt, config.kind, k, config.sigma,
                config.safeguard, config.eig_floor, config.shock_pairing, geo,
            )
        except (SPDViolationError, FlowInstabilityError) as exc:
            exc.step = n
            raise
        geo = local_geometry(current)
        diag.energy.append(volume_energy(current, geometry=geo))
        diag.max_abs_H.append(float(np.sqrt((H * H).sum(axis=-1)).max()))
        diag.safeguard_activations.append(n_fixed)
        diag.min_eigenvalue.append(float(np.linalg.eigvalsh(current.matrices())[..., 0].min()))
        diag.wall_time.append(time.perf_counter() - t0)
        if callback is not None:
            callback(n, current, diag)
    return current, diag

"""Tensor field files, synthetic test fields, noise and glyph tables.

Field file layout (``.spdf``)
-----------------------------
An ASCII header of ``key value`` lines terminated by ``end``::

    SPDF
    version 1
    dims 32 32
    spacing 1.0 1.0
    ordering vech6:[11,22,33,12,23,13]
    end

followed by the raw payload: little-endian float64, voxels in C order of
``dims`` (so ``z``, then ``y``, then ``x`` varies slowest to fastest) and the
six channels of a voxel contiguous.

Random streams
--------------
Noise for voxel ``i`` (flat C-order index) is drawn from
``numpy.random.Generator(PCG64(SeedSequence([seed, i])))``, so every
voxel's stream is independent of grid traversal order.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import check_domain, DomainError, expm, spd_check, sqrtm, unvech, vech
from .immersion import TensorField

__all__ = [
    "MAGIC",
    "FORMAT_VERSION",
    "ORDERING_TAG",
    "GLYPH_COLUMNS",
    "PATTERNS",
    "FieldFormatError",
    "SyntheticSpec",
    "rotation_z",
    "generate_synthetic",
    "voxel_generator",
    "add_noise",
    "write_field",
    "read_field",
    "glyph_table",
    "export_glyphs",
]

MAGIC = "SPDF"
FORMAT_VERSION = 1
ORDERING_TAG = "vech6:[11,22,33,12,23,13]"
GLYPH_COLUMNS = ("x", "y", "z", "a1", "a2", "a3",
                 "e1x", "e1y", "e1z", "e2x", "e2y", "e2z", "e3x", "e3y", "e3z")
PATTERNS = ("constant", "two_region", "smooth_rotation", "crossing")


class FieldFormatError(ValueError):
    """Malformed or incompatible field file."""


###############################################################################
# Synthetic fields


def rotation_z(theta):
    """Rotation matrices about the z axis, shape ``(..., 3, 3)``."""
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    R = np.zeros(theta.shape + (3, 3))
    R[..., 0, 0] = c
    R[..., 0, 1] = -s
    R[..., 1, 0] = s
    R[..., 1, 1] = c
    R[..., 2, 2] = 1.0
    return R


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a synthetic ground-truth field.

    Attributes
    ----------
    pattern : str
        ``constant``, ``two_region``, ``smooth_rotation`` or ``crossing``.
    dims : tuple of int
        Grid extents in array order, ``(ny, nx)`` or ``(nz, ny, nx)``.
    spacing : tuple of float, optional
    tensor : array_like, optional
        Base tensor: a 3 x 3 matrix, a vech 6-vector or 3 diagonal entries.
        Defaults to ``diag(3, 1, 1)``.
    tensor_b : array_like, optional
        Right-hand tensor of ``two_region``; defaults to ``tensor`` rotated
        by 90 degrees about z.
    rate : float, optional
        Rotation rate of ``smooth_rotation`` in radians per unit length;
        defaults to a half turn across the x extent.
    background, strength : float
        Isotropic level and fibre strength of ``crossing``.
    """

    pattern: str
    dims: tuple
    spacing: Optional[tuple] = None
    tensor: Optional[tuple] = None
    tensor_b: Optional[tuple] = None
    rate: Optional[float] = None
    background: float = 0.5
    strength: float = 2.0


def _as_tensor(t, name):
    a = np.asarray(t, dtype=float)
    if a.shape == (3,):
        a = np.diag(a)
    elif a.shape == (6,):
        a = unvech(a)
    elif a.shape != (3, 3):
        raise ValueError(f"{name} must be 3 diagonal entries, 6 vech entries or a 3x3 matrix")
    try:
        return check_domain(unvech(vech(a)))
    except DomainError:
        raise ValueError(f"{name} is not positive definite") from None


def _coords(dims, spacing, axis):
    """Physical coordinate along array axis ``axis`` broadcast to the grid."""
    n = dims[axis]
    shape = [1] * len(dims)
    shape[axis] = n
    return (np.arange(n) * spacing[axis]).reshape(shape) * np.ones(dims)


def generate_synthetic(spec: SyntheticSpec) -> TensorField:
    """Deterministic SPD field built from ``spec``.

    Patterns vary along the last two array axes (y, x) and are constant
    along z in 3-D.
    """
    dims = tuple(int(n) for n in spec.dims)
    if len(dims) not in (2, 3) or min(dims) < 3:
        raise ValueError(f"dims must have 2 or 3 extents, each >= 3; got {spec.dims}")
    spacing = tuple(spec.spacing) if spec.spacing is not None else (1.0,) * len(dims)
    if len(spacing) != len(dims):
        raise ValueError("spacing and dims disagree in length")
    A = _as_tensor(spec.tensor if spec.tensor is not None else (3.0, 1.0, 1.0), "tensor")
    nx = dims[-1]
    x = _coords(dims, spacing, len(dims) - 1)

    if spec.pattern == "constant":
        P = np.broadcast_to(A, dims + (3, 3))
    elif spec.pattern == "two_region":
        if spec.tensor_b is None:
            R = rotation_z(np.pi / 2)
            B = R @ A @ R.T
        else:
            B = _as_tensor(spec.tensor_b, "tensor_b")
        right = (np.arange(nx) >= nx // 2) * np.ones(dims, dtype=bool)
        P = np.where(right[..., None, None], B, A)
    elif spec.pattern == "smooth_rotation":
        rate = spec.rate if spec.rate is not None else np.pi / (nx * spacing[-1])
        R = rotation_z(rate * x)
        P = R @ A @ np.swapaxes(R, -1, -2)
    elif spec.pattern == "crossing":
        if not spec.background > 0 or spec.strength < 0:
            raise ValueError("crossing needs background > 0 and strength >= 0")
        ny = dims[-2]
        iy = np.arange(ny)[:, None] * np.ones((ny, nx))
        ix = np.ones((ny, nx)) * np.arange(nx)[None, :]
        h_band = (iy >= ny // 3) & (iy < ny - ny // 3)
        v_band = (ix >= nx // 3) & (ix < nx - nx // 3)
        h_band = np.broadcast_to(h_band, dims)
        v_band = np.broadcast_to(v_band, dims)
        ex = np.diag([1.0, 0.0, 0.0])
        ey = np.diag([0.0, 1.0, 0.0])
        P = (spec.background * np.eye(3)
             + spec.strength * h_band[..., None, None] * ex
             + spec.strength * v_band[..., None, None] * ey)
    else:
        raise ValueError(f"unknown pattern {spec.pattern!r}; expected one of {PATTERNS}")
    return TensorField(vech(np.ascontiguousarray(P)), spacing)


###############################################################################
# Noise


def voxel_generator(seed: int, index: int) -> np.random.Generator:
    """Random stream of one voxel."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(index)])))


def _symmetric_normals(seed, n):
    Z = np.stack([voxel_generator(seed, i).standard_normal((3, 3)) for i in range(n)])
    return 0.5 * (Z + np.swapaxes(Z, -1, -2))


def add_noise(field: TensorField, sigma_noise: float, seed: int, model: str = "multiplicative",
              max_tries: int = 100) -> TensorField:
    """Perturb every voxel of ``field`` with seeded random noise.

    Parameters
    ----------
    sigma_noise : float
        Noise amplitude, >= 0.
    seed : int
        Non-negative seed; each voxel gets its own stream.
    model : {'multiplicative', 'additive'}
        ``multiplicative`` sets ``P <- P^1/2 expm(sigma W) P^1/2`` with ``W``
        the symmetric part of a standard normal 3 x 3 matrix; the result is
        SPD by construction.  ``additive`` sets ``P <- P + sigma W`` and
        redraws (from the same voxel stream) until the voxel is SPD.
    """
    if sigma_noise < 0:
        raise ValueError(f"sigma_noise must be non-negative, got {sigma_noise}")
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    if sigma_noise == 0:
        return field.copy()
    P = field.matrices().reshape(-1, 3, 3)
    n = len(P)
    if model == "multiplicative":
        W = _symmetric_normals(seed, n)
        S = sqrtm(P)
        out = S @ expm(sigma_noise * W) @ S
        out = 0.5 * (out + np.swapaxes(out, -1, -2))
    elif model == "additive":
        out = np.empty_like(P)
        for i in range(n):
            rng = voxel_generator(seed, i)
            for _ in range(max_tries):
                Z = rng.standard_normal((3, 3))
                cand = P[i] + sigma_noise * 0.5 * (Z + Z.T)
                if spd_check(cand)[0]:
                    break
            else:
                raise ValueError(f"additive noise failed to stay SPD at voxel {i} after {max_tries} draws")
            out[i] = cand
    else:
        raise ValueError(f"unknown noise model {model!r}")
    return field.with_data(vech(out).reshape(field.data.shape))


###############################################################################
# File format


def write_field(field: TensorField, path) -> None:
    """Write ``field`` as a ``.spdf`` file (see module docstring)."""
    header = (
        f"{MAGIC}\n"
        f"version {FORMAT_VERSION}\n"
        f"dims {' '.join(str(n) for n in field.dims)}\n"
        f"spacing {' '.join(repr(h) for h in field.spacing)}\n"
        f"ordering {ORDERING_TAG}\n"
        "end\n"
    )
    payload = np.ascontiguousarray(field.data, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(payload)


def _read_header(fh):
    lines = []
    while True:
        raw = fh.readline()
        if not raw:
            raise FieldFormatError("header: missing 'end' line")
        line = raw.decode("ascii", errors="replace").strip()
        if line == "end":
            return lines
        lines.append(line)
        if len(lines) > 64:
            raise FieldFormatError("header: too many lines (missing 'end'?)")


def read_field(path, strict: bool = False) -> TensorField:
    """Read a ``.spdf`` file.

    Non-SPD voxels trigger a warning, or :class:`FieldFormatError` when
    ``strict`` is set.
    """
    with open(path, "rb") as fh:
        lines = _read_header(fh)
        payload = fh.read()
    if not lines or lines[0] != MAGIC:
        raise FieldFormatError(f"magic: expected {MAGIC!r}, got {lines[0] if lines else ''!r}")
    meta = {}
    for line in lines[1:]:
        key, _, value = line.partition(" ")
        meta[key] = value.strip()
    for key in ("version", "dims", "spacing", "ordering"):
        if key not in meta:
            raise FieldFormatError(f"{key}: missing from header")
    try:
        version = int(meta["version"])
    except ValueError:
        raise FieldFormatError(f"version: not an integer: {meta['version']!r}") from None
    if version != FORMAT_VERSION:
        raise FieldFormatError(f"version: unsupported version {version}")
    if meta["ordering"] != ORDERING_TAG:
        raise FieldFormatError(f"ordering: unknown channel ordering tag {meta['ordering']!r}")
    try:
        dims = tuple(int(t) for t in meta["dims"].split())
    except ValueError:
        raise FieldFormatError(f"dims: malformed {meta['dims']!r}") from None
    try:
        spacing = tuple(float(t) for t in meta["spacing"].split())
    except ValueError:
        raise FieldFormatError(f"spacing: malformed {meta['spacing']!r}") from None
    if len(dims) not in (2, 3) or min(dims) < 3:
        raise FieldFormatError(f"dims: need 2 or 3 extents >= 3, got {dims}")
    if len(spacing) != len(dims):
        raise FieldFormatError(f"spacing: expected {len(dims)} values, got {len(spacing)}")
    expected = int(np.prod(dims)) * 6 * 8
    if len(payload) < expected:
        raise FieldFormatError(f"truncated payload: expected {expected} bytes, got {len(payload)}")
    if len(payload) > expected:
        raise FieldFormatError(f"payload: {len(payload) - expected} trailing bytes")
    data = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(dims + (6,))
    try:
        field = TensorField(data, spacing)
    except ValueError as exc:
        raise FieldFormatError(str(exc)) from None
    ok, _ = field.check_spd()
    if not np.all(ok):
        msg = f"{int(np.count_nonzero(~ok))} voxel(s) are not positive definite"
        if strict:
            raise FieldFormatError(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return field


###############################################################################
# Glyphs


def _oriented_frames(P):
    """Eigen-decomposition sorted by ellipsoid semi-axis, with a fixed sign convention."""
    lam, V = np.linalg.eigh(P)
    # semi-axes are eigenvalues of P^-1; list them smallest first
    order = np.argsort(-lam, axis=-1, kind="stable")
    lam = np.take_along_axis(lam, order, axis=-1)
    V = np.take_along_axis(V, order[..., None, :], axis=-1)
    for j in range(2):
        col = V[..., :, j]
        big = np.take_along_axis(col, np.argmax(np.abs(col), axis=-1)[..., None], axis=-1)
        V[..., :, j] = np.where(big < 0, -col, col)
    V[..., :, 2] = np.cross(V[..., :, 0], V[..., :, 1])
    return 1.0 / lam, V


def glyph_table(field: TensorField) -> np.ndarray:
    """Glyph rows, shape ``(n_voxels, 15)``, columns as in ``GLYPH_COLUMNS``.

    Centres are ``index * spacing`` with array axes mapped to (z, y, x)
    from the right; ``z`` is 0 for 2-D fields.  Semi-axis lengths are the
    eigenvalues of ``P^-1`` in ascending order, and ``e1..e3`` the matching
    unit eigenvectors: the first two have their largest-magnitude
    component positive and ``e3 = e1 x e2``.
    """
    P = field.matrices().reshape(-1, 3, 3)
    axes, V = _oriented_frames(P)
    idx = np.indices(field.dims).reshape(field.ndim, -1)
    centres = np.zeros((len(P), 3))
    for a in range(field.ndim):
        # array axis a maps to x, y, z counted from the last axis
        centres[:, field.ndim - 1 - a] = idx[a] * field.spacing[a]
    frames = np.swapaxes(V, -1, -2).reshape(len(P), 9)
    return np.hstack([centres, axes, frames])


def export_glyphs(field: TensorField, path) -> int:
    """Write the glyph table as CSV; returns the number of rows."""
    rows = glyph_table(field)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(GLYPH_COLUMNS)
        for row in rows:
            writer.writerow([format(v, ".17g") for v in row])
    return len(rows)

"""Riemannian geometry of the cone of symmetric positive-definite matrices.

Coordinates on P(n) are the independent entries of a symmetric matrix,
ordered diagonal first and then by superdiagonal.  For n = 3 this gives

    vech(P) = [P11, P22, P33, P12, P23, P13]

which is the ordering used everywhere in this package.  All functions
broadcast over leading axes, so a whole tensor field of shape
``(..., 3, 3)`` can be passed at once.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "DomainError",
    "DuplicationMatrix",
    "duplication_matrix",
    "vech_indices",
    "vech",
    "unvech",
    "spd_check",
    "check_domain",
    "det3",
    "adjugate3",
    "metric_tensor",
    "inverse_metric_tensor",
    "inverse_metric_explicit",
    "metric_determinant",
    "christoffel",
    "christoffel_kronecker",
    "dual_basis",
    "inner_product",
    "sym_funm",
    "sqrtm",
    "invsqrtm",
    "logm",
    "expm",
]

#: Relative eigenvalue threshold below which a matrix is treated as singular.
DOMAIN_RTOL = 1e-12


class DomainError(ValueError):
    """Raised when a matrix is not (numerically) symmetric positive definite."""


###############################################################################
# Half-vectorisation and duplication matrices


@lru_cache(maxsize=None)
def vech_indices(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Row and column indices of the vech coordinates of an n x n matrix."""
    rows, cols = [], []
    for offset in range(n):
        for i in range(n - offset):
            rows.append(i)
            cols.append(i + offset)
    r = np.array(rows)
    c = np.array(cols)
    r.setflags(write=False)
    c.setflags(write=False)
    return r, c


@dataclass(frozen=True)
class DuplicationMatrix:
    """Duplication matrix ``D`` with ``vec(A) == D @ vech(A)``.

    ``vec`` stacks columns, so ``vec(A)[i + n*j] == A[i, j]``.
    """

    n: int
    D: np.ndarray
    Dplus: np.ndarray

    @property
    def d(self) -> int:
        return self.n * (self.n + 1) // 2


@lru_cache(maxsize=None)
def duplication_matrix(n: int) -> DuplicationMatrix:
    """Build the duplication matrix ``D_n`` and its Moore-Penrose inverse.

    Parameters
    ----------
    n : int
        Matrix size, ``1 <= n <= 8``.

    Returns
    -------
    DuplicationMatrix
        ``D`` has shape ``(n*n, n*(n+1)/2)``; ``Dplus = (D^T D)^{-1} D^T``.
    """
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or not 1 <= n <= 8:
        raise ValueError(f"duplication matrix size must be an integer in [1, 8], got {n!r}")
    n = int(n)
    rows, cols = vech_indices(n)
    d = len(rows)
    D = np.zeros((n * n, d))
    for a, (i, j) in enumerate(zip(rows, cols)):
        D[i + n * j, a] = 1.0
        D[j + n * i, a] = 1.0
    # D^T D is diagonal (1 for diagonal coordinates, 2 otherwise)
    Dplus = D.T / np.diag(D.T @ D)[:, None]
    D.setflags(write=False)
    Dplus.setflags(write=False)
    return DuplicationMatrix(n, D, Dplus)


def _check_symmetric(A, rtol=1e-10):
    A = np.asarray(A, dtype=float)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise ValueError(f"expected square matrices, got shape {A.shape}")
    asym = np.abs(A - np.swapaxes(A, -1, -2)).max(initial=0.0)
    scale = max(1.0, np.abs(A).max(initial=0.0))
    if asym > rtol * scale:
        raise ValueError(f"matrix is not symmetric (max asymmetry {asym:.3g})")
    return A


def vech(A) -> np.ndarray:
    """Half-vectorise symmetric matrices of shape ``(..., n, n)``.

    Tiny round-off asymmetries are averaged away; anything larger raises
    ``ValueError``.
    """
    A = _check_symmetric(A)
    r, c = vech_indices(A.shape[-1])
    return 0.5 * (A[..., r, c] + A[..., c, r])


def unvech(v) -> np.ndarray:
    """Inverse of :func:`vech`; ``v`` has shape ``(..., n(n+1)/2)``."""
    v = np.asarray(v, dtype=float)
    d = v.shape[-1]
    n = int(round((np.sqrt(8 * d + 1) - 1) / 2))
    if n * (n + 1) // 2 != d:
        raise ValueError(f"length {d} is not a triangular number")
    r, c = vech_indices(n)
    A = np.empty(v.shape[:-1] + (n, n))
    A[..., r, c] = v
    A[..., c, r] = v
    return A


###############################################################################
# Cone membership


def spd_check(P):
    """Return ``(is_spd, min_eigenvalue)`` for symmetric matrices.

    Works on a single matrix or on a stack; for a stack both outputs are
    arrays over the leading axes.
    """
    P = np.asarray(P, dtype=float)
    lam = np.linalg.eigvalsh(P)[..., 0]
    ok = np.isfinite(lam) & (lam > 0)
    if P.ndim == 2:
        return bool(ok), float(lam)
    return ok, lam


def check_domain(P) -> np.ndarray:
    """Raise :class:`DomainError` unless every matrix is well inside the cone.

    A matrix is rejected when its smallest eigenvalue is below
    ``1e-12 * trace(P) / 3`` or when it holds non-finite entries.
    """
    P = np.asarray(P, dtype=float)
    if not np.all(np.isfinite(P)):
        raise DomainError("matrix has non-finite entries")
    lam = np.linalg.eigvalsh(P)
    floor = DOMAIN_RTOL * np.trace(P, axis1=-2, axis2=-1) / P.shape[-1]
    bad = lam[..., 0] <= floor
    if np.any(bad):
        worst = lam[..., 0].min()
        raise DomainError(
            f"{int(np.count_nonzero(bad))} matrix/matrices not positive definite "
            f"(smallest eigenvalue {worst:.3g})"
        )
    return P


def det3(P) -> np.ndarray:
    """Determinant of 3 x 3 matrices by cofactor expansion."""
    P = np.asarray(P, dtype=float)
    a, b, c = P[..., 0, 0], P[..., 0, 1], P[..., 0, 2]
    d, e, f = P[..., 1, 0], P[..., 1, 1], P[..., 1, 2]
    g, h, i = P[..., 2, 0], P[..., 2, 1], P[..., 2, 2]
    return a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g)


def adjugate3(P) -> np.ndarray:
    """Adjugate (transposed cofactor matrix) of 3 x 3 matrices."""
    P = np.asarray(P, dtype=float)
    adj = np.empty_like(P)
    for i in range(3):
        for j in range(3):
            r = [k for k in range(3) if k != j]
            c = [k for k in range(3) if k != i]
            minor = (P[..., r[0], c[0]] * P[..., r[1], c[1]]
                     - P[..., r[0], c[1]] * P[..., r[1], c[0]])
            adj[..., i, j] = (-1) ** (i + j) * minor
    return adj


def _inv3(P):
    return adjugate3(P) / det3(P)[..., None, None]


###############################################################################
# Metric tensor


def _kron(A, B):
    """Batched Kronecker product matching ``np.kron`` on the last two axes."""
    n = A.shape[-1]
    K = np.einsum("...ac,...bd->...abcd", A, B)
    return K.reshape(K.shape[:-4] + (n * n, n * n))


def metric_tensor(P) -> np.ndarray:
    r"""Components of the affine-invariant metric in vech coordinates.

    .. math:: G(P) = D^T (P^{-1} \otimes P^{-1}) D

    so that ``vech(A) @ G @ vech(B) == trace(P^-1 A P^-1 B)``.

    Parameters
    ----------
    P : ndarray, shape (..., 3, 3)
        SPD base points.

    Returns
    -------
    G : ndarray, shape (..., 6, 6)
    """
    P = check_domain(P)
    Dn = duplication_matrix(P.shape[-1])
    Q = _inv3(P) if P.shape[-1] == 3 else np.linalg.inv(P)
    return Dn.D.T @ _kron(Q, Q) @ Dn.D


def inverse_metric_tensor(P) -> np.ndarray:
    r"""Inverse metric :math:`G^{-1}(P) = D^+ (P \otimes P) D^{+T}`."""
    P = check_domain(P)
    Dn = duplication_matrix(P.shape[-1])
    return Dn.Dplus @ _kron(P, P) @ Dn.Dplus.T


def inverse_metric_explicit(P) -> np.ndarray:
    """Inverse metric of P(3) written out entry by entry.

    Independent of the Kronecker construction; used to cross-check
    :func:`inverse_metric_tensor`.
    """
    P = check_domain(P)
    p1, p2, p3 = P[..., 0, 0], P[..., 1, 1], P[..., 2, 2]
    p4, p5, p6 = P[..., 0, 1], P[..., 1, 2], P[..., 0, 2]
    rows = [
        [p1 * p1, p4 * p4, p6 * p6, p1 * p4, p4 * p6, p1 * p6],
        [p4 * p4, p2 * p2, p5 * p5, p2 * p4, p2 * p5, p4 * p5],
        [p6 * p6, p5 * p5, p3 * p3, p6 * p5, p5 * p3, p6 * p3],
        [p1 * p4, p2 * p4, p6 * p5, 0.5 * (p1 * p2 + p4 * p4),
         0.5 * (p4 * p5 + p6 * p2), 0.5 * (p1 * p5 + p4 * p6)],
        [p4 * p6, p2 * p5, p5 * p3, 0.5 * (p4 * p5 + p6 * p2),
         0.5 * (p5 * p5 + p2 * p3), 0.5 * (p6 * p5 + p4 * p3)],
        [p1 * p6, p4 * p5, p6 * p3, 0.5 * (p1 * p5 + p4 * p6),
         0.5 * (p6 * p5 + p4 * p3), 0.5 * (p1 * p3 + p6 * p6)],
    ]
    return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)


def metric_determinant(P) -> np.ndarray:
    """Determinant of :func:`metric_tensor`, ``2**(n(n-1)/2) * det(P)**-(n+1)``.

    For n = 3 this is ``8 / det(P)**4``.
    """
    P = check_domain(P)
    n = P.shape[-1]
    detP = det3(P) if n == 3 else np.linalg.det(P)
    return 2.0 ** (n * (n - 1) // 2) * detP ** (-(n + 1))


###############################################################################
# Christoffel symbols

# Each block lists one matrix Gamma^gamma[alpha, beta] as multiples of the
# adjugate coordinates s^k; "2s4" means 2 * s^4.  The scalar in front is the
# prefactor multiplying -1/det(P).
_CHRISTOFFEL_TABLE = (
    (1.0, """
        s1 .  .  s4 .  s6
        .  .  .  .  .  .
        .  .  .  .  .  .
        s4 .  .  s2 .  s5
        .  .  .  .  .  .
        s6 .  .  s5 .  s3
    """),
    (1.0, """
        .  .  .  .  .  .
        .  s2 .  s4 s5 .
        .  .  .  .  .  .
        .  s4 .  s1 s6 .
        .  s5 .  s6 s3 .
        .  .  .  .  .  .
    """),
    (1.0, """
        .  .  .  .  .  .
        .  .  .  .  .  .
        .  .  s3 .  s5 s6
        .  .  .  .  .  .
        .  .  s5 .  s2 s4
        .  .  s6 .  s4 s1
    """),
    (0.5, """
        .  s4 .  s1  s6 .
        s4 .  .  s2  .  s5
        .  .  .  .   .  .
        s1 s2 .  2s4 s5 s6
        s6 .  .  s5  .  s3
        .  s5 .  s6  s3 .
    """),
    (0.5, """
        .  .  .  .  .   .
        .  .  s5 .  s2  s4
        .  s5 .  s6 s3  .
        .  .  s6 .  s4  s1
        .  s2 s3 s4 2s5 s6
        .  s4 .  s1 s6  .
    """),
    (0.5, """
        .  .  s6 .  s4 s1
        .  .  .  .  .  .
        s6 .  .  s5 .  s3
        .  .  s5 .  s2 s4
        s4 .  .  s2 .  s5
        s1 .  s3 s4 s5 2s6
    """),
)


def _christoffel_coefficients() -> np.ndarray:
    """Coefficient tensor C[gamma, alpha, beta, k] with Gamma = -C @ s / det P."""
    C = np.zeros((6, 6, 6, 6))
    for g, (scale, text) in enumerate(_CHRISTOFFEL_TABLE):
        rows = [line.split() for line in text.strip().splitlines()]
        for a, row in enumerate(rows):
            for b, tok in enumerate(row):
                if tok == ".":
                    continue
                mult, k = tok.split("s")
                C[g, a, b, int(k) - 1] = scale * (float(mult) if mult else 1.0)
    C.setflags(write=False)
    return C


_CHRISTOFFEL_C = _christoffel_coefficients()


def christoffel(P) -> np.ndarray:
    """Christoffel symbols of P(3) in vech coordinates.

    Evaluated from the adjugate ``s = vech(adj P)`` and ``rho = det P``,
    with every nonzero symbol equal to ``-s^k / rho`` or half of it.

    Parameters
    ----------
    P : ndarray, shape (..., 3, 3)

    Returns
    -------
    Gamma : ndarray, shape (..., 6, 6, 6)
        ``Gamma[..., g, a, b]`` is the symbol with upper index ``g`` and lower
        indices ``a, b``; symmetric in ``a, b`` by construction.
    """
    P = check_domain(P)
    if P.shape[-2:] != (3, 3):
        raise ValueError("closed-form Christoffel symbols are only available for 3 x 3")
    rho = det3(P)
    s = vech(adjugate3(P))
    return -np.einsum("gabk,...k->...gab", _CHRISTOFFEL_C, s) / rho[..., None, None, None]


def dual_basis(n: int = 3) -> np.ndarray:
    """Matrices ``E[g]`` with ``trace(E[g] @ B) == vech(B)[g]`` for symmetric B."""
    r, c = vech_indices(n)
    E = np.zeros((len(r), n, n))
    for g, (i, j) in enumerate(zip(r, c)):
        if i == j:
            E[g, i, i] = 1.0
        else:
            E[g, i, j] = E[g, j, i] = 0.5
    return E


def christoffel_kronecker(P) -> np.ndarray:
    r"""Christoffel symbols from :math:`-[D^T (P^{-1} \otimes E^\gamma) D]`.

    General-n counterpart of :func:`christoffel`, built from the trace-dual
    basis of :func:`dual_basis`.
    """
    P = check_domain(P)
    n = P.shape[-1]
    Dn = duplication_matrix(n)
    Q = np.linalg.inv(P)
    E = dual_basis(n)
    K = _kron(Q[..., None, :, :], np.broadcast_to(E, Q.shape[:-2] + E.shape))
    return -(Dn.D.T @ K @ Dn.D)


###############################################################################
# Inner product and matrix functions


def inner_product(P, A, B) -> np.ndarray:
    """Affine-invariant inner product ``trace(P^-1 A P^-1 B)`` at base point P."""
    P = check_domain(P)
    A = _check_symmetric(A)
    B = _check_symmetric(B)
    X = np.linalg.solve(P, A)
    Y = np.linalg.solve(P, B)
    return np.einsum("...ij,...ji->...", X, Y)


def sym_funm(P, func) -> np.ndarray:
    """Apply a scalar function to the eigenvalues of symmetric matrices."""
    lam, V = np.linalg.eigh(np.asarray(P, dtype=float))
    return (V * func(lam)[..., None, :]) @ np.swapaxes(V, -1, -2)


def sqrtm(P):
    return sym_funm(P, np.sqrt)


def invsqrtm(P):
    return sym_funm(P, lambda x: 1.0 / np.sqrt(x))


def logm(P):
    return sym_funm(P, np.log)


def expm(S):
    return sym_funm(S, np.exp)

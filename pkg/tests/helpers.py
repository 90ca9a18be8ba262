"""Random SPD matrices and analytic test fields."""

import numpy as np

from spdflow.fieldio import rotation_z
from spdflow.geometry import vech
from spdflow.immersion import TensorField


def random_rotation(rng):
    Q, R = np.linalg.qr(rng.normal(size=(3, 3)))
    Q = Q * np.sign(np.diag(R))
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return Q


def random_spd(rng, cond_max=1e3, scale=True):
    """Random SPD matrix with condition number log-uniform in [1, cond_max]."""
    cond = np.exp(rng.uniform(0, np.log(cond_max)))
    lam = np.exp(rng.uniform(0, np.log(cond), 3))
    lam[0], lam[1] = 1.0, cond
    if scale:
        lam = lam * np.exp(rng.uniform(-1, 1))
    Q = random_rotation(rng)
    P = (Q * lam) @ Q.T
    return 0.5 * (P + P.T)


def random_symmetric(rng):
    A = rng.normal(size=(3, 3))
    return A + A.T


def random_invertible(rng):
    while True:
        L = rng.normal(size=(3, 3))
        if abs(np.linalg.det(L)) > 0.1 and np.linalg.cond(L) < 50:
            return L


def smooth_matrices(dims, spacing=None, amp=1.0):
    """Analytic SPD field varying along every axis."""
    spacing = spacing or (1.0,) * len(dims)
    axes = np.meshgrid(*[np.arange(n) * h for n, h in zip(dims, spacing)], indexing="ij")
    x = axes[-1]
    y = axes[-2]
    z = axes[0] if len(dims) == 3 else np.zeros(dims)
    theta = amp * 0.8 * np.sin(0.4 * x + 0.3 * y + 0.2 * z)
    D = np.zeros(dims + (3, 3))
    D[..., 0, 0] = 2 + amp * 0.5 * np.cos(0.3 * y + 0.1 * z)
    D[..., 1, 1] = 1 + amp * 0.3 * np.sin(0.5 * x)
    D[..., 2, 2] = 0.7 + amp * 0.2 * np.cos(0.2 * x + 0.4 * y - 0.3 * z)
    R = rotation_z(theta)
    P = R @ D @ np.swapaxes(R, -1, -2)
    off = amp * 0.1 * np.sin(0.3 * x + 0.5 * y + 0.25 * z)
    P[..., 0, 2] += off
    P[..., 2, 0] += off
    return P


def smooth_field(dims=(5, 5, 5), spacing=None, amp=1.0):
    return TensorField(vech(smooth_matrices(dims, spacing, amp)), spacing)

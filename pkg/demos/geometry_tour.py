"""
Geometry of the SPD cone in vech coordinates
============================================

Builds the 6 x 6 metric tensor at a few matrices, checks it against the
trace form of the inner product, and looks at how its conditioning and
the Christoffel symbols behave as the matrix gets more anisotropic.
"""

import numpy as np

from spdflow.geometry import (
    christoffel,
    duplication_matrix,
    inner_product,
    inverse_metric_tensor,
    metric_determinant,
    metric_tensor,
    vech,
)

np.set_printoptions(precision=4, suppress=True)

# vech stores the diagonal first, then the superdiagonals
A = np.array([[1.0, 4.0, 6.0], [4.0, 2.0, 5.0], [6.0, 5.0, 3.0]])
print("vech(A) =", vech(A))
print("D_3 @ vech(A) rebuilds the column-stacked vec:", np.array_equal(duplication_matrix(3).D @ vech(A), A.T.ravel()))

# at the identity the metric is diag(1, 1, 1, 2, 2, 2):
# off-diagonal coordinates appear twice in the full matrix
print("G(I) =\n", metric_tensor(np.eye(3)))

P = np.array([[2.0, 0.3, 0.1], [0.3, 1.0, 0.2], [0.1, 0.2, 0.5]])
B = np.array([[0.0, 1.0, 0.0], [1.0, 0.5, 0.0], [0.0, 0.0, -1.0]])
G = metric_tensor(P)
print("vech(A) G vech(B) =", vech(A) @ G @ vech(B))
print("tr(P^-1 A P^-1 B) =", inner_product(P, A, B))
print("det G =", metric_determinant(P), " dense:", np.linalg.det(G))

# stretching P makes G badly conditioned: cond(G) ~ cond(P)^2, and the
# roundoff in G G^-1 grows with it once the eigenframe is not axis-aligned
R, _ = np.linalg.qr(np.array([[1.0, 2.0, 0.5], [0.3, -1.0, 2.0], [1.5, 0.2, -0.7]]))
for c in (1e1, 1e3, 1e5):
    Pc = R @ np.diag([1.0, 1.0, c]) @ R.T
    Pc = 0.5 * (Pc + Pc.T)
    Gc = metric_tensor(Pc)
    res = np.abs(Gc @ inverse_metric_tensor(Pc) - np.eye(6)).max()
    print(f"cond(P)={c:.0e}  cond(G)={np.linalg.cond(Gc):.1e}  max|G G^-1 - I|={res:.1e}")

# Christoffel symbols scale like 1/P
Gam = christoffel(P)
print("max |Gamma(P)| =", np.abs(Gam).max(), " max |Gamma(10 P)| =", np.abs(christoffel(10 * P)).max())

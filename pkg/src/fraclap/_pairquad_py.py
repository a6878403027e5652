"""Pure-numpy fallback for the pair-quadrature accumulation kernel.

Same contract as the compiled extension ``fraclap._pairquad``: given a batch
of triangle pairs with precomputed physical quadrature points, weights, P2
basis values, and global dof indices, accumulate the truncated-kernel
tensor-quadrature contributions into the dense operator in place.
"""

from __future__ import annotations

import numpy as np


def accumulate(
    A: np.ndarray,
    X: np.ndarray,  # (P, nqx, 2) physical points, side 1
    WX: np.ndarray,  # (P, nqx) physical weights (pair factors folded in)
    PHI1: np.ndarray,  # (P, nqx, 6) P2 values of side-1 host triangle
    IDX1: np.ndarray,  # (P, 6) global dofs, side 1
    Y: np.ndarray,
    WY: np.ndarray,
    PHI2: np.ndarray,
    IDX2: np.ndarray,
    alpha: float,
    lam2: float,  # squared truncation radius (inf disables the cutoff)
) -> None:
    diff = X[:, :, None, :] - Y[:, None, :, :]
    d2 = np.einsum("pqrd,pqrd->pqr", diff, diff)
    mask = (d2 <= lam2) & (d2 > 0.0)
    kern = np.zeros_like(d2)
    np.power(d2, -(1.0 + alpha), out=kern, where=mask)
    w = WX[:, :, None] * WY[:, None, :] * kern  # (P, nqx, nqy)

    tt = np.einsum("pq,pqa,pqb->pab", w.sum(axis=2), PHI1, PHI1)
    ss = np.einsum("pr,pra,prb->pab", w.sum(axis=1), PHI2, PHI2)
    ts = np.einsum("pqr,pqa,prb->pab", w, PHI1, PHI2)

    P = X.shape[0]
    block = np.empty((P, 12, 12))
    block[:, :6, :6] = tt
    block[:, :6, 6:] = -ts
    block[:, 6:, :6] = -ts.transpose(0, 2, 1)
    block[:, 6:, 6:] = ss

    idx = np.concatenate([IDX1, IDX2], axis=1)
    np.add.at(A, (idx[:, :, None], idx[:, None, :]), block)

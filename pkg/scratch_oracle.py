"""Scratch: calibrate production nonlocal assembly against a brute-force oracle."""
import numpy as np
import fraclap
from fraclap.nonlocal_assembly import assemble_fractional, FractionalParams, kernel_constant


def duffy_rule(n):
    x, w = np.polynomial.legendre.leggauss(n)
    u = 0.5 * (x + 1.0)
    wu = 0.5 * w
    U, V = np.meshgrid(u, u, indexing="ij")
    WU, WV = np.meshgrid(wu, wu, indexing="ij")
    xi = U.ravel()
    eta = (V * (1.0 - U)).ravel()
    wt = (WU * WV * (1.0 - U)).ravel()
    bary = np.column_stack([1 - xi - eta, xi, eta])
    return bary, wt


def p2_vals_batch(host, pts):
    """host (3,2); pts (...,2) -> (...,6), own barycentric solve."""
    T = np.column_stack([host[1] - host[0], host[2] - host[0]])
    Tinv = np.linalg.inv(T)
    loc = (pts - host[0]) @ Tinv.T
    l1, l2 = loc[..., 0], loc[..., 1]
    l0 = 1 - l1 - l2
    return np.stack([l0*(2*l0-1), l1*(2*l1-1), l2*(2*l2-1), 4*l0*l1, 4*l1*l2, 4*l2*l0], axis=-1)


def split4(t):
    a, b, c = t
    ab, bc, ca = (a+b)/2, (b+c)/2, (c+a)/2
    return [np.array([a, ab, ca]), np.array([ab, b, bc]), np.array([ca, bc, c]), np.array([ab, bc, ca])]


def oracle_pair(tri1, tri2, alpha, lam, levels, nquad):
    """Ordered-pair 12x12 integral (no C/2 factor), graded subdivision."""
    bary_a, w_a = duffy_rule(nquad)
    bary_b, w_b = duffy_rule(nquad + 1)
    scale = np.sqrt(((tri1 - tri1[0])**2).sum(-1).max())
    tol2 = (1e-9 * scale)**2
    plain, ident = [], []

    def rec(t1, t2, lev):
        d2 = ((t1[:, None, :] - t2[None, :, :])**2).sum(-1).min()
        if d2 > tol2:
            plain.append((t1, t2))
            return
        if lev == levels:
            if np.abs(t1 - t2).max() <= 1e-9 * scale:
                ident.append((t1, t2))
            else:
                plain.append((t1, t2))
            return
        for c1 in split4(t1):
            for c2 in split4(t2):
                rec(c1, c2, lev + 1)

    rec(tri1, tri2, 0)
    total = np.zeros((12, 12))
    lam2 = lam * lam

    def process(pairs, bb, wb, chunk=2048):
        nonlocal total
        if not pairs:
            return
        T1 = np.array([p[0] for p in pairs])
        T2 = np.array([p[1] for p in pairs])
        for k0 in range(0, len(pairs), chunk):
            t1 = T1[k0:k0+chunk]
            t2 = T2[k0:k0+chunk]
            a1 = 0.5*np.abs(np.cross(t1[:,1]-t1[:,0], t1[:,2]-t1[:,0]))
            a2 = 0.5*np.abs(np.cross(t2[:,1]-t2[:,0], t2[:,2]-t2[:,0]))
            X = np.einsum('qv,pvd->pqd', bary_a, t1)
            Y = np.einsum('qv,pvd->pqd', bb, t2)
            P1 = p2_vals_batch(tri1, X)
            P2 = p2_vals_batch(tri2, Y)
            D2 = ((X[:,:,None,:]-Y[:,None,:,:])**2).sum(-1)
            ok = (D2 <= lam2) & (D2 > 0)
            K = np.zeros_like(D2)
            np.power(D2, -(1+alpha), out=K, where=ok)
            W = (w_a*2)[None,:,None]*a1[:,None,None] * ((wb*2)[None,None,:]*a2[:,None,None]) * K
            tt = np.einsum('pq,pqa,pqb->ab', W.sum(2), P1, P1)
            ss = np.einsum('pr,pra,prb->ab', W.sum(1), P2, P2)
            ts = np.einsum('pqr,pqa,prb->ab', W, P1, P2)
            total[:6,:6] += tt; total[6:,6:] += ss
            total[:6,6:] -= ts; total[6:,:6] -= ts.T

    process(plain, bary_a, w_a)
    process(ident, bary_b, w_b)
    return total


def oracle_matrix(mesh, dm, alpha, lam, levels, nquad):
    n = dm.n_u
    A = np.zeros((n, n))
    cd2 = 0.5 * kernel_constant(2, alpha)
    tris = mesh.vertices[mesh.triangles]
    nt = mesh.num_triangles
    for t1 in range(nt):
        for t2 in range(nt):
            loc = oracle_pair(tris[t1], tris[t2], alpha, lam, levels, nquad)
            gi = np.concatenate([dm.tri_p2[t1], dm.tri_p2[t2]])
            np.add.at(A, (gi[:, None], gi[None, :]), cd2 * loc)
    return A


if __name__ == "__main__":
    import time
    mesh = fraclap.build_rectangle_mesh(1, 0.0)
    dm = fraclap.build_dof_map(mesh)
    for alpha in (0.25, 0.5, 0.75):
        t0 = time.time()
        O = oracle_matrix(mesh, dm, alpha, 100.0, levels=6, nquad=6)
        t1 = time.time()
        print(f"--- alpha={alpha}: oracle took {t1-t0:.1f}s, |O|max={np.abs(O).max():.4f}")
        for L, deg in [(4, 3), (5, 3), (6, 3), (4, 5), (6, 5)]:
            params = FractionalParams(alpha=alpha, gamma=1.0, lam=100.0,
                                      pair_quadrature_degree=deg,
                                      diagonal_refinement_levels=L,
                                      allow_mesh_clipping=True)
            A = assemble_fractional(mesh, dm, params).array
            scale = np.abs(O).max()
            rel = np.abs(A - O) / np.maximum(np.abs(O), 1e-14 * scale)
            print(f"  L={L} deg={deg}: max rel err {rel.max():.3e}")

"""Vectorized NumPy implementations of the hot kernels.

Mirrors `_impl_numba`; the active implementation is chosen in `backend`.
Conventions shared by both backends:

* 2x2 matrices are flattened row-major: vec(F) = (F00, F01, F10, F11).
* symmetric 3x3 coefficient matrices are packed as the upper triangle
  in the order (00, 01, 02, 11, 12, 22).
* design-matrix parameter columns: stiffness offset (6 packed entries,
  optional) | per-center gradient coefficients (3 each, optional) |
  per-center Hessian coefficients (6 packed each, optional); stress
  rows carry the zero-strain correction that eliminates the stress
  offset, so predicted stress vanishes at zero strain by construction.
"""

from __future__ import annotations

import numpy as np

_SYM_I = np.array([0, 0, 0, 1, 1, 2])
_SYM_J = np.array([0, 1, 2, 1, 2, 2])

# r/r0 below this is treated as the center; see kernels.Kernel.d1_over_r.
_CENTER_TOL = 1e-5


def rbf_parts(code, r0, r):
    """phi, phi', phi'' and the regularized ratios psi = phi'/r and
    c2 = (phi'' - psi)/r^2 used to assemble spatial Hessians."""
    r = np.asarray(r, dtype=float)
    if code == 0:
        s2 = r * r + r0 * r0
        s = np.sqrt(s2)
        phi = s
        d1 = r / s
        d2 = r0 * r0 / (s2 * s)
        psi = 1.0 / s
        c2 = -1.0 / (s2 * s)
        return phi, d1, d2, psi, c2
    t = (r / r0) ** 2
    if code == 1:
        e = np.exp(-t)
        phi = e
        d1 = -2.0 * r / (r0 * r0) * e
        d2 = (4.0 * r * r / r0 ** 4 - 2.0 / r0 ** 2) * e
        psi = -2.0 / (r0 * r0) * e
    elif code == 2:
        q = 1.0 + t
        phi = 1.0 / q
        d1 = -2.0 * r / (r0 * r0) / (q * q)
        d2 = 8.0 * r * r / r0 ** 4 / q ** 3 - 2.0 / (r0 * r0) / (q * q)
        psi = -2.0 / (r0 * r0) / (q * q)
    else:
        q = 1.0 + t
        phi = q ** (-0.5)
        d1 = -r / (r0 * r0) * q ** (-1.5)
        d2 = 3.0 * r * r / r0 ** 4 * q ** (-2.5) - 1.0 / (r0 * r0) * q ** (-1.5)
        psi = -1.0 / (r0 * r0) * q ** (-1.5)
    small = r < _CENTER_TOL * r0
    rr = np.where(small, 1.0, r * r)
    c2 = np.where(small, 0.0, (d2 - psi) / rr)
    return phi, d1, d2, psi, c2


def model_eval_batch(code, r0, centers, gradc, hessc, s_off, k_off, strains):
    """Energy, stress and stiffness of the RBF energy model at each strain.

    Returns (psi (n,), s (n,3), K (n,3,3)).
    """
    E = np.asarray(strains, dtype=float)
    n = E.shape[0]
    energy = E @ s_off + 0.5 * np.einsum("na,ab,nb->n", E, k_off, E)
    stress = s_off + E @ k_off.T
    stiff = np.broadcast_to(k_off, (n, 3, 3)).copy()
    k = centers.shape[0]
    if k == 0:
        return energy, stress, stiff

    d = E[:, None, :] - centers[None, :, :]          # (n,k,3)
    r = np.sqrt(np.einsum("nkc,nkc->nk", d, d))
    phi, _, d2, psi, c2 = rbf_parts(code, r0, r)

    g = psi[:, :, None] * d                          # (n,k,3) spatial gradient of phi
    # spatial Hessian H = psi*I + c2 * d d^T
    H = c2[:, :, None, None] * np.einsum("nka,nkb->nkab", d, d)
    H[:, :, 0, 0] += psi
    H[:, :, 1, 1] += psi
    H[:, :, 2, 2] += psi

    wd = np.einsum("nkc,kc->nk", d, gradc)           # w_i . d
    Wd = np.einsum("kab,nkb->nka", hessc, d)         # W_i d
    dWd = np.einsum("nka,nka->nk", d, Wd)

    energy += np.einsum("nk,nk->n", phi, wd) + np.einsum("nk,nk->n", phi, dWd)
    stress += np.einsum("nk,kc->nc", phi, gradc) + np.einsum("nk,nkc->nc", wd, g)
    stress += 2.0 * np.einsum("nk,nka->na", phi, Wd) + np.einsum("nk,nka->na", dWd, g)

    stiff += np.einsum("ka,nkb->nab", gradc, g) + np.einsum("nka,kb->nab", g, gradc)
    stiff += np.einsum("nk,nkab->nab", wd, H)
    stiff += 2.0 * np.einsum("nka,nkb->nab", Wd, g) + 2.0 * np.einsum("nka,nkb->nab", g, Wd)
    stiff += 2.0 * np.einsum("nk,kab->nab", phi, hessc)
    stiff += np.einsum("nk,nkab->nab", dWd, H)
    return energy, stress, stiff


def _basis_fields(code, r0, centers, E):
    d = E[:, None, :] - centers[None, :, :]
    r = np.sqrt(np.einsum("nkc,nkc->nk", d, d))
    phi, _, _, psi, c2 = rbf_parts(code, r0, r)
    g = psi[:, :, None] * d
    H = c2[:, :, None, None] * np.einsum("nka,nkb->nkab", d, d)
    H[:, :, 0, 0] += psi
    H[:, :, 1, 1] += psi
    H[:, :, 2, 2] += psi
    return d, phi, g, H


def design_blocks(code, r0, centers, strains, use_koff, use_grad, use_hess):
    """Stress and stiffness rows of the linear least-squares design.

    Returns (S (n,3,p), K (n,6,p)); K rows are packed upper-triangle
    entries without Frobenius weighting.
    """
    E = np.asarray(strains, dtype=float)
    n = E.shape[0]
    k = centers.shape[0]
    p = 6 * use_koff + (3 * k) * use_grad + (6 * k) * use_hess
    S = np.zeros((n, 3, p))
    K = np.zeros((n, 6, p))
    col = 0

    if use_koff:
        for q in range(6):
            a, b = _SYM_I[q], _SYM_J[q]
            S[:, a, col] += E[:, b]
            if a != b:
                S[:, b, col] += E[:, a]
            pq = _pack_index(a, b)
            K[:, pq, col] += 1.0
            col += 1

    if k and (use_grad or use_hess):
        d, phi, g, H = _basis_fields(code, r0, centers, E)
        zero = np.zeros((1, 3))
        d0, phi0, g0, _ = _basis_fields(code, r0, centers, zero)
        d0, phi0, g0 = d0[0], phi0[0], g0[0]

    if use_grad:
        for i in range(k):
            for m in range(3):
                # stress basis phi*e_m + d_m*g, minus its value at E = 0
                S[:, m, col] += phi[:, i] - phi0[i]
                S[:, :, col] += d[:, i, m, None] * g[:, i, :]
                S[:, :, col] -= d0[i, m] * g0[i, :]
                # stiffness basis e_m g^T + g e_m^T + d_m H
                M = d[:, i, m, None, None] * H[:, i]
                M[:, m, :] += g[:, i, :]
                M[:, :, m] += g[:, i, :]
                K[:, :, col] += M[:, _SYM_I, _SYM_J]
                col += 1

    if use_hess:
        for i in range(k):
            for q in range(6):
                a, b = _SYM_I[q], _SYM_J[q]
                Ad = np.zeros((n, 3))
                Ad[:, a] += d[:, i, b]
                Ad0 = np.zeros(3)
                Ad0[a] += d0[i, b]
                if a == b:
                    dAd = d[:, i, a] * d[:, i, a]
                    dAd0 = d0[i, a] * d0[i, a]
                else:
                    Ad[:, b] += d[:, i, a]
                    Ad0[b] += d0[i, a]
                    dAd = 2.0 * d[:, i, a] * d[:, i, b]
                    dAd0 = 2.0 * d0[i, a] * d0[i, b]
                S[:, :, col] += 2.0 * phi[:, i, None] * Ad + dAd[:, None] * g[:, i, :]
                S[:, :, col] -= 2.0 * phi0[i] * Ad0 + dAd0 * g0[i, :]
                M = 2.0 * np.einsum("na,nb->nab", Ad, g[:, i]) \
                    + 2.0 * np.einsum("na,nb->nab", g[:, i], Ad) \
                    + dAd[:, None, None] * H[:, i]
                M[:, a, b] += 2.0 * phi[:, i]
                if a != b:
                    M[:, b, a] += 2.0 * phi[:, i]
                K[:, :, col] += M[:, _SYM_I, _SYM_J]
                col += 1
    return S, K


def _pack_index(a, b):
    lo, hi = (a, b) if a <= b else (b, a)
    return {(0, 0): 0, (0, 1): 1, (0, 2): 2, (1, 1): 3, (1, 2): 4, (2, 2): 5}[(lo, hi)]


# ---------------------------------------------------------------------------
# Neo-Hookean triangle FEM assembly
# ---------------------------------------------------------------------------

def _deformation(x, tri, dminv):
    xe = x[tri]                                       # (ne,3,2)
    ds = np.stack((xe[:, 1] - xe[:, 0], xe[:, 2] - xe[:, 0]), axis=-1)
    F = ds @ dminv
    det = F[:, 0, 0] * F[:, 1, 1] - F[:, 0, 1] * F[:, 1, 0]
    return F, det


def _shape_grads(dminv):
    h = np.empty(dminv.shape[:1] + (3, 2))
    h[:, 1, :] = dminv[:, 0, :]
    h[:, 2, :] = dminv[:, 1, :]
    h[:, 0, :] = -h[:, 1, :] - h[:, 2, :]
    return h


def fem_energy(x, tri, dminv, areas, mu, lam):
    F, det = _deformation(x, tri, dminv)
    min_det = float(det.min()) if det.size else 1.0
    if min_det <= 0.0:
        return np.inf, min_det
    lnj = 0.5 * np.log(det * det)
    i1 = np.einsum("eij,eij->e", F, F)
    psi = 0.5 * mu * (i1 - 2.0) - mu * lnj + 0.5 * lam * lnj * lnj
    return float(areas @ psi), min_det


def _pk1(F, det, mu, lam):
    lnj = np.log(det)
    ginv = np.empty_like(F)                           # F^{-T}
    ginv[:, 0, 0] = F[:, 1, 1]
    ginv[:, 0, 1] = -F[:, 1, 0]
    ginv[:, 1, 0] = -F[:, 0, 1]
    ginv[:, 1, 1] = F[:, 0, 0]
    ginv /= det[:, None, None]
    alpha = lam * lnj - mu
    P = mu * F + alpha[:, None, None] * ginv
    return P, ginv, alpha, lnj


def fem_grad(x, tri, dminv, areas, mu, lam, dof_map):
    """Total energy, average first Piola-Kirchhoff stress (area-weighted
    sum), and the reduced gradient."""
    F, det = _deformation(x, tri, dminv)
    min_det = float(det.min()) if det.size else 1.0
    n_red = int(dof_map.max()) + 1 if dof_map.size else 0
    if min_det <= 0.0:
        return np.inf, min_det, np.zeros((2, 2)), np.zeros(n_red)
    lnj = np.log(det)
    i1 = np.einsum("eij,eij->e", F, F)
    energy = float(areas @ (0.5 * mu * (i1 - 2.0) - mu * lnj + 0.5 * lam * lnj * lnj))
    P, _, _, _ = _pk1(F, det, mu, lam)
    pbar = np.einsum("e,eij->ij", areas, P)
    h = _shape_grads(dminv)
    gnodes = areas[:, None, None] * np.einsum("edj,eaj->ead", P, h)   # (ne,3,2)
    grad = np.zeros(n_red)
    dofs = dof_map[tri]                               # (ne,3,2)
    mask = dofs >= 0
    np.add.at(grad, dofs[mask], gnodes[mask])
    return energy, min_det, pbar, grad


def fem_hess_vals(x, tri, dminv, areas, mu, lam):
    """Per-element 6x6 Hessian blocks in local (node, component) order."""
    F, det = _deformation(x, tri, dminv)
    _, ginv, alpha, _ = _pk1(F, det, mu, lam)
    h = _shape_grads(dminv)
    m = np.einsum("edj,eaj->ead", ginv, h)            # (ne,3,2)
    hh = np.einsum("eaj,ebj->eab", h, h)
    vals = np.zeros((len(areas), 3, 2, 3, 2))
    vals[:, :, 0, :, 0] = mu[:, None, None] * hh
    vals[:, :, 1, :, 1] = mu[:, None, None] * hh
    vals -= alpha[:, None, None, None, None] * np.einsum("ebd,eaf->eadbf", m, m)
    vals += lam[:, None, None, None, None] * np.einsum("ead,ebf->eadbf", m, m)
    vals *= areas[:, None, None, None, None]
    return vals.reshape(len(areas), 6, 6)


def fem_coupling(x, tri, dminv, areas, mu, lam, dof_map, n_red):
    """Hessian blocks coupling the macro deformation gradient (vec, 4)
    with itself (a_ff) and with the reduced displacements (a_fu)."""
    F, det = _deformation(x, tri, dminv)
    _, ginv, alpha, _ = _pk1(F, det, mu, lam)
    h = _shape_grads(dminv)
    m = np.einsum("edj,eaj->ead", ginv, h)

    eye = np.eye(2)
    a_ff_e = (mu[:, None, None, None, None] * np.einsum("ik,jl->ijkl", eye, eye)
              - alpha[:, None, None, None, None] * np.einsum("eil,ekj->eijkl", ginv, ginv)
              + lam[:, None, None, None, None] * np.einsum("eij,ekl->eijkl", ginv, ginv))
    a_ff = np.einsum("e,eijkl->ijkl", areas, a_ff_e).reshape(4, 4)

    # coupling rows: mu*delta_id*h_aj - alpha*G_dj*m_ai + lam*G_ij*m_ad
    c = (-alpha[:, None, None, None, None] * np.einsum("edj,eai->eijad", ginv, m)
         + lam[:, None, None, None, None] * np.einsum("eij,ead->eijad", ginv, m))
    c = c + mu[:, None, None, None, None] * np.einsum("id,eaj->eijad", eye, h)
    c *= areas[:, None, None, None, None]
    c = c.reshape(len(areas), 4, 6)

    a_fu = np.zeros((4, n_red))
    dofs = dof_map[tri].reshape(len(areas), 6)
    mask = dofs >= 0
    for v in range(4):
        np.add.at(a_fu[v], dofs[mask], c[:, v, :][mask])
    return a_ff, a_fu

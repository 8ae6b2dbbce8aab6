"""Numba-compiled implementations of the hot kernels.

Loop-style twins of `_impl_numpy` (same signatures, same conventions).
All kernels are serial `@njit(cache=True)`: deterministic accumulation
order, compiled once per process and cached on disk.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_CENTER_TOL = 1e-5


@njit(cache=True)
def _parts_scalar(code, r0, r):
    """(phi, d1, d2, psi, c2) at a single radius; psi = d1/r and
    c2 = (d2 - psi)/r^2, both with their r -> 0 limits."""
    if code == 0:
        s2 = r * r + r0 * r0
        s = np.sqrt(s2)
        return s, r / s, r0 * r0 / (s2 * s), 1.0 / s, -1.0 / (s2 * s)
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
    if r < _CENTER_TOL * r0:
        c2 = 0.0
    else:
        c2 = (d2 - psi) / (r * r)
    return phi, d1, d2, psi, c2


def rbf_parts(code, r0, r):
    r = np.atleast_1d(np.asarray(r, dtype=float))
    return _rbf_parts_arr(code, r0, r.ravel())


@njit(cache=True)
def _rbf_parts_arr(code, r0, r):
    n = r.shape[0]
    phi = np.empty(n)
    d1 = np.empty(n)
    d2 = np.empty(n)
    psi = np.empty(n)
    c2 = np.empty(n)
    for i in range(n):
        phi[i], d1[i], d2[i], psi[i], c2[i] = _parts_scalar(code, r0, r[i])
    return phi, d1, d2, psi, c2


@njit(cache=True)
def model_eval_batch(code, r0, centers, gradc, hessc, s_off, k_off, strains):
    n = strains.shape[0]
    k = centers.shape[0]
    energy = np.zeros(n)
    stress = np.zeros((n, 3))
    stiff = np.zeros((n, 3, 3))
    d = np.empty(3)
    g = np.empty(3)
    Wd = np.empty(3)
    for s in range(n):
        E = strains[s]
        acc = 0.0
        for a in range(3):
            acc += s_off[a] * E[a]
            stress[s, a] += s_off[a]
            for b in range(3):
                acc += 0.5 * E[a] * k_off[a, b] * E[b]
                stress[s, a] += k_off[a, b] * E[b]
                stiff[s, a, b] += k_off[a, b]
        energy[s] += acc
        for i in range(k):
            r2 = 0.0
            for c in range(3):
                d[c] = E[c] - centers[i, c]
                r2 += d[c] * d[c]
            r = np.sqrt(r2)
            phi, _, _, psi, c2 = _parts_scalar(code, r0, r)
            for c in range(3):
                g[c] = psi * d[c]
            wd = 0.0
            dWd = 0.0
            for a in range(3):
                wd += gradc[i, a] * d[a]
                Wd[a] = 0.0
                for b in range(3):
                    Wd[a] += hessc[i, a, b] * d[b]
            for a in range(3):
                dWd += d[a] * Wd[a]
            energy[s] += phi * wd + phi * dWd
            for a in range(3):
                stress[s, a] += phi * gradc[i, a] + wd * g[a]
                stress[s, a] += 2.0 * phi * Wd[a] + dWd * g[a]
            for a in range(3):
                for b in range(3):
                    H = c2 * d[a] * d[b]
                    if a == b:
                        H += psi
                    stiff[s, a, b] += gradc[i, a] * g[b] + g[a] * gradc[i, b] + wd * H
                    stiff[s, a, b] += 2.0 * (Wd[a] * g[b] + g[a] * Wd[b])
                    stiff[s, a, b] += 2.0 * phi * hessc[i, a, b] + dWd * H
    return energy, stress, stiff


@njit(cache=True)
def design_blocks(code, r0, centers, strains, use_koff, use_grad, use_hess):
    sym_i = np.array([0, 0, 0, 1, 1, 2])
    sym_j = np.array([0, 1, 2, 1, 2, 2])
    n = strains.shape[0]
    k = centers.shape[0]
    p = 0
    if use_koff:
        p += 6
    if use_grad:
        p += 3 * k
    if use_hess:
        p += 6 * k
    S = np.zeros((n, 3, p))
    K = np.zeros((n, 6, p))

    d0 = np.empty((k, 3))
    phi0 = np.empty(k)
    g0 = np.empty((k, 3))
    for i in range(k):
        r2 = 0.0
        for c in range(3):
            d0[i, c] = -centers[i, c]
            r2 += d0[i, c] * d0[i, c]
        phi, _, _, psi, _ = _parts_scalar(code, r0, np.sqrt(r2))
        phi0[i] = phi
        for c in range(3):
            g0[i, c] = psi * d0[i, c]

    d = np.empty(3)
    g = np.empty(3)
    H = np.empty((3, 3))
    Ad = np.empty(3)
    Ad0 = np.empty(3)
    for s in range(n):
        E = strains[s]
        col = 0
        if use_koff:
            for q in range(6):
                a, b = sym_i[q], sym_j[q]
                S[s, a, col] += E[b]
                if a != b:
                    S[s, b, col] += E[a]
                K[s, q, col] += 1.0
                col += 1
        for i in range(k):
            if not (use_grad or use_hess):
                break
            r2 = 0.0
            for c in range(3):
                d[c] = E[c] - centers[i, c]
                r2 += d[c] * d[c]
            phi, _, _, psi, c2 = _parts_scalar(code, r0, np.sqrt(r2))
            for c in range(3):
                g[c] = psi * d[c]
            for a in range(3):
                for b in range(3):
                    H[a, b] = c2 * d[a] * d[b]
                H[a, a] += psi
            if use_grad:
                gcol = col + 3 * i
                for m in range(3):
                    S[s, m, gcol + m] += phi - phi0[i]
                    for c in range(3):
                        S[s, c, gcol + m] += d[m] * g[c] - d0[i, m] * g0[i, c]
                    for q in range(6):
                        a, b = sym_i[q], sym_j[q]
                        val = d[m] * H[a, b]
                        if a == m:
                            val += g[b]
                        if b == m:
                            val += g[a]
                        K[s, q, gcol + m] += val
            if use_hess:
                hcol = col + 3 * k * use_grad + 6 * i
                for qq in range(6):
                    a, b = sym_i[qq], sym_j[qq]
                    for c in range(3):
                        Ad[c] = 0.0
                        Ad0[c] = 0.0
                    Ad[a] += d[b]
                    Ad0[a] += d0[i, b]
                    if a == b:
                        dAd = d[a] * d[a]
                        dAd0 = d0[i, a] * d0[i, a]
                    else:
                        Ad[b] += d[a]
                        Ad0[b] += d0[i, a]
                        dAd = 2.0 * d[a] * d[b]
                        dAd0 = 2.0 * d0[i, a] * d0[i, b]
                    for c in range(3):
                        S[s, c, hcol + qq] += 2.0 * phi * Ad[c] + dAd * g[c]
                        S[s, c, hcol + qq] -= 2.0 * phi0[i] * Ad0[c] + dAd0 * g0[i, c]
                    for q in range(6):
                        pa, pb = sym_i[q], sym_j[q]
                        val = 2.0 * (Ad[pa] * g[pb] + g[pa] * Ad[pb]) + dAd * H[pa, pb]
                        if pa == a and pb == b:
                            val += 2.0 * phi
                        if a != b and pa == b and pb == a:
                            val += 2.0 * phi
                        K[s, q, hcol + qq] += val
        # advance col bookkeeping is handled via gcol/hcol offsets
    return S, K


# ---------------------------------------------------------------------------
# Neo-Hookean triangle FEM assembly
# ---------------------------------------------------------------------------

@njit(cache=True, inline="always")
def _element_F(x, tri, dminv, e):
    i0, i1, i2 = tri[e, 0], tri[e, 1], tri[e, 2]
    d00 = x[i1, 0] - x[i0, 0]
    d10 = x[i1, 1] - x[i0, 1]
    d01 = x[i2, 0] - x[i0, 0]
    d11 = x[i2, 1] - x[i0, 1]
    f00 = d00 * dminv[e, 0, 0] + d01 * dminv[e, 1, 0]
    f01 = d00 * dminv[e, 0, 1] + d01 * dminv[e, 1, 1]
    f10 = d10 * dminv[e, 0, 0] + d11 * dminv[e, 1, 0]
    f11 = d10 * dminv[e, 0, 1] + d11 * dminv[e, 1, 1]
    return f00, f01, f10, f11


@njit(cache=True)
def fem_energy(x, tri, dminv, areas, mu, lam):
    ne = tri.shape[0]
    energy = 0.0
    min_det = 1.0
    for e in range(ne):
        f00, f01, f10, f11 = _element_F(x, tri, dminv, e)
        det = f00 * f11 - f01 * f10
        if det < min_det:
            min_det = det
        if det <= 0.0:
            return np.inf, min_det
        lnj = np.log(det)
        i1 = f00 * f00 + f01 * f01 + f10 * f10 + f11 * f11
        energy += areas[e] * (0.5 * mu[e] * (i1 - 2.0) - mu[e] * lnj
                              + 0.5 * lam[e] * lnj * lnj)
    return energy, min_det


@njit(cache=True)
def fem_grad(x, tri, dminv, areas, mu, lam, dof_map):
    ne = tri.shape[0]
    n_red = 0
    for v in range(dof_map.shape[0]):
        for c in range(2):
            if dof_map[v, c] + 1 > n_red:
                n_red = dof_map[v, c] + 1
    energy = 0.0
    min_det = 1.0
    pbar = np.zeros((2, 2))
    grad = np.zeros(n_red)
    h = np.empty((3, 2))
    P = np.empty((2, 2))
    for e in range(ne):
        f00, f01, f10, f11 = _element_F(x, tri, dminv, e)
        det = f00 * f11 - f01 * f10
        if det < min_det:
            min_det = det
        if det <= 0.0:
            return np.inf, min_det, pbar, grad
        lnj = np.log(det)
        i1 = f00 * f00 + f01 * f01 + f10 * f10 + f11 * f11
        energy += areas[e] * (0.5 * mu[e] * (i1 - 2.0) - mu[e] * lnj
                              + 0.5 * lam[e] * lnj * lnj)
        alpha = lam[e] * lnj - mu[e]
        # F^{-T}
        g00 = f11 / det
        g01 = -f10 / det
        g10 = -f01 / det
        g11 = f00 / det
        P[0, 0] = mu[e] * f00 + alpha * g00
        P[0, 1] = mu[e] * f01 + alpha * g01
        P[1, 0] = mu[e] * f10 + alpha * g10
        P[1, 1] = mu[e] * f11 + alpha * g11
        A = areas[e]
        pbar[0, 0] += A * P[0, 0]
        pbar[0, 1] += A * P[0, 1]
        pbar[1, 0] += A * P[1, 0]
        pbar[1, 1] += A * P[1, 1]
        h[1, 0] = dminv[e, 0, 0]
        h[1, 1] = dminv[e, 0, 1]
        h[2, 0] = dminv[e, 1, 0]
        h[2, 1] = dminv[e, 1, 1]
        h[0, 0] = -h[1, 0] - h[2, 0]
        h[0, 1] = -h[1, 1] - h[2, 1]
        for a in range(3):
            node = tri[e, a]
            for dcomp in range(2):
                dof = dof_map[node, dcomp]
                if dof >= 0:
                    grad[dof] += A * (P[dcomp, 0] * h[a, 0] + P[dcomp, 1] * h[a, 1])
    return energy, min_det, pbar, grad


@njit(cache=True)
def fem_hess_vals(x, tri, dminv, areas, mu, lam):
    ne = tri.shape[0]
    vals = np.zeros((ne, 6, 6))
    h = np.empty((3, 2))
    m = np.empty((3, 2))
    for e in range(ne):
        f00, f01, f10, f11 = _element_F(x, tri, dminv, e)
        det = f00 * f11 - f01 * f10
        lnj = np.log(det)
        alpha = lam[e] * lnj - mu[e]
        g00 = f11 / det
        g01 = -f10 / det
        g10 = -f01 / det
        g11 = f00 / det
        h[1, 0] = dminv[e, 0, 0]
        h[1, 1] = dminv[e, 0, 1]
        h[2, 0] = dminv[e, 1, 0]
        h[2, 1] = dminv[e, 1, 1]
        h[0, 0] = -h[1, 0] - h[2, 0]
        h[0, 1] = -h[1, 1] - h[2, 1]
        for a in range(3):
            m[a, 0] = g00 * h[a, 0] + g01 * h[a, 1]
            m[a, 1] = g10 * h[a, 0] + g11 * h[a, 1]
        A = areas[e]
        for a in range(3):
            for dcomp in range(2):
                ra = 2 * a + dcomp
                for b in range(3):
                    hh = h[a, 0] * h[b, 0] + h[a, 1] * h[b, 1]
                    for ecomp in range(2):
                        rb = 2 * b + ecomp
                        v = -alpha * m[b, dcomp] * m[a, ecomp] + lam[e] * m[a, dcomp] * m[b, ecomp]
                        if dcomp == ecomp:
                            v += mu[e] * hh
                        vals[e, ra, rb] = vals[e, ra, rb] + A * v
    return vals


@njit(cache=True)
def fem_coupling(x, tri, dminv, areas, mu, lam, dof_map, n_red):
    ne = tri.shape[0]
    a_ff = np.zeros((4, 4))
    a_fu = np.zeros((4, n_red))
    h = np.empty((3, 2))
    m = np.empty((3, 2))
    g = np.empty((2, 2))
    for e in range(ne):
        f00, f01, f10, f11 = _element_F(x, tri, dminv, e)
        det = f00 * f11 - f01 * f10
        lnj = np.log(det)
        alpha = lam[e] * lnj - mu[e]
        g[0, 0] = f11 / det
        g[0, 1] = -f10 / det
        g[1, 0] = -f01 / det
        g[1, 1] = f00 / det
        A = areas[e]
        for i in range(2):
            for j in range(2):
                vi = 2 * i + j
                for kk in range(2):
                    for ll in range(2):
                        vk = 2 * kk + ll
                        v = -alpha * g[i, ll] * g[kk, j] + lam[e] * g[i, j] * g[kk, ll]
                        if i == kk and j == ll:
                            v += mu[e]
                        a_ff[vi, vk] += A * v
        h[1, 0] = dminv[e, 0, 0]
        h[1, 1] = dminv[e, 0, 1]
        h[2, 0] = dminv[e, 1, 0]
        h[2, 1] = dminv[e, 1, 1]
        h[0, 0] = -h[1, 0] - h[2, 0]
        h[0, 1] = -h[1, 1] - h[2, 1]
        for a in range(3):
            m[a, 0] = g[0, 0] * h[a, 0] + g[0, 1] * h[a, 1]
            m[a, 1] = g[1, 0] * h[a, 0] + g[1, 1] * h[a, 1]
        for a in range(3):
            node = tri[e, a]
            for dcomp in range(2):
                dof = dof_map[node, dcomp]
                if dof < 0:
                    continue
                for i in range(2):
                    for j in range(2):
                        vi = 2 * i + j
                        v = -alpha * g[dcomp, j] * m[a, i] + lam[e] * g[i, j] * m[a, dcomp]
                        if i == dcomp:
                            v += mu[e] * h[a, j]
                        a_fu[vi, dof] += A * v
    return a_ff, a_fu

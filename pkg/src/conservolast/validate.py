"""Validation experiments: error tables, orthogonal-stretch checks,
coarse simulation with a fitted energy, and extrapolation splits.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse
import scipy.sparse.linalg
from scipy.optimize import minimize_scalar

from .errors import DegenerateData, NoMinimum, NonConverged
from .fit import FitConfig, greedy_fit
from .homogenize import MacroDeformation, _factor_spd
from .model import (EnergyModel, energy, energy_many, stiffness,
                    stiffness_many, stress_many)

_LAMBDA2_BRACKET = (0.3, 2.5)


@dataclass
class ValidationReport:
    stress_error_pct: float = float("nan")
    stiffness_error_pct: float = float("nan")
    orthogonal_error_pct: float = float("nan")
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)


def error_table(model: EnergyModel, samples) -> ValidationReport:
    """Per-sample and aggregate stress/stiffness errors, normalized by
    the RMS of the targets (aggregate = RMS of the per-sample rows)."""
    strains = np.array([s.strain for s in samples])
    targets_s = np.array([s.target_stress for s in samples])
    pred_s = stress_many(model, strains)
    pred_k = stiffness_many(model, strains)
    s_rms = float(np.sqrt(np.mean(np.einsum("nc,nc->n", targets_s, targets_s))))
    kk = [float(np.sum(s.target_stiffness ** 2)) for s in samples
          if s.target_stiffness is not None]
    k_rms = float(np.sqrt(np.mean(kk))) if kk else 0.0
    if s_rms == 0.0:
        raise DegenerateData("zero RMS stress target")

    rows, ds2, dk2 = [], [], []
    for i, s in enumerate(samples):
        d = pred_s[i] - s.target_stress
        ds2.append(float(d @ d))
        row = {"stress_norm_target": float(np.linalg.norm(s.target_stress)),
               "stress_norm_fitted": float(np.linalg.norm(pred_s[i])),
               "stress_error_pct": float(100.0 * np.sqrt(ds2[-1]) / s_rms)}
        if s.target_stiffness is not None and k_rms > 0:
            dk = pred_k[i] - s.target_stiffness
            dk2.append(float(np.sum(dk * dk)))
            row.update({"stiffness_norm_target": float(np.linalg.norm(s.target_stiffness)),
                        "stiffness_norm_fitted": float(np.linalg.norm(pred_k[i])),
                        "stiffness_error_pct": float(100.0 * np.sqrt(dk2[-1]) / k_rms)})
        else:
            row.update({"stiffness_norm_target": float("nan"),
                        "stiffness_norm_fitted": float("nan"),
                        "stiffness_error_pct": float("nan")})
        rows.append(row)
    return ValidationReport(
        stress_error_pct=float(100.0 * np.sqrt(np.mean(ds2)) / s_rms),
        stiffness_error_pct=(float(100.0 * np.sqrt(np.mean(dk2)) / k_rms)
                             if dk2 else float("nan")),
        rows=rows,
        metadata={"s_rms": s_rms, "k_rms": k_rms, "n_samples": len(samples)})


def minimize_orthogonal_stretch(model: EnergyModel, lambda1, theta,
                                bracket=_LAMBDA2_BRACKET, scan=48) -> float:
    """lambda2 minimizing the model energy at fixed (lambda1, theta):
    coarse scan plus bounded Brent refinement on the interior bracket."""
    lam2s = np.linspace(bracket[0], bracket[1], scan)

    def f(lam2):
        return energy(model, MacroDeformation(lambda1, lam2, theta).green())

    vals = np.array([f(l2) for l2 in lam2s])
    i = int(np.argmin(vals))
    if i == 0 or i == scan - 1:
        raise NoMinimum(f"energy minimum at bracket boundary lambda2={lam2s[i]:.3f}")
    res = minimize_scalar(f, bracket=(lam2s[i - 1], lam2s[i], lam2s[i + 1]),
                          method="brent", options={"xtol": 1e-10})
    return float(res.x)


def orthogonal_validation(model: EnergyModel, points) -> ValidationReport:
    """Orthogonal-stretch error of the model against tile references.

    ``points``: iterable of (lambda1, theta, lambda2_reference).  The
    error normalizer is the reference contraction |lambda2 - 1| with a
    floor of 1e-3 |lambda2| so rigid responses do not divide by zero.
    """
    rows = []
    errs = []
    for lam1, theta, lam2_ref in points:
        lam2 = minimize_orthogonal_stretch(model, lam1, theta)
        denom = max(abs(lam2_ref - 1.0), 1e-3 * abs(lam2_ref))
        err = 100.0 * abs(lam2 - lam2_ref) / denom
        errs.append(err)
        rows.append({"lambda1": float(lam1), "theta": float(theta),
                     "lambda2_tile": float(lam2_ref), "lambda2_model": float(lam2),
                     "error_pct": float(err)})
    return ValidationReport(orthogonal_error_pct=float(np.mean(errs)), rows=rows,
                            metadata={"n_points": len(rows),
                                      "max_error_pct": float(np.max(errs))})


# ---------------------------------------------------------------------------
# coarse simulation with a fitted energy as the constitutive law
# ---------------------------------------------------------------------------

_D2E = np.zeros((3, 4, 4))
_D2E[0, 0, 0] = _D2E[0, 2, 2] = 1.0
_D2E[1, 1, 1] = _D2E[1, 3, 3] = 1.0
_D2E[2, 0, 1] = _D2E[2, 1, 0] = _D2E[2, 2, 3] = _D2E[2, 3, 2] = 1.0


def _coarse_fields(model, verts, tris, dminv, areas, u, need_hess):
    x = verts + u
    xe = x[tris]
    ds = np.stack((xe[:, 1] - xe[:, 0], xe[:, 2] - xe[:, 0]), axis=-1)
    F = ds @ dminv
    det = F[:, 0, 0] * F[:, 1, 1] - F[:, 0, 1] * F[:, 1, 0]
    if det.min() <= 0.0:
        return np.inf, None, None, float(det.min())
    strains = np.stack((0.5 * (F[:, 0, 0] ** 2 + F[:, 1, 0] ** 2 - 1.0),
                        0.5 * (F[:, 0, 1] ** 2 + F[:, 1, 1] ** 2 - 1.0),
                        F[:, 0, 0] * F[:, 0, 1] + F[:, 1, 0] * F[:, 1, 1]), axis=1)
    psi = energy_many(model, strains)
    s = stress_many(model, strains)
    total = float(areas @ psi)
    g_mat = np.zeros((len(tris), 3, 4))
    g_mat[:, 0, 0] = F[:, 0, 0]
    g_mat[:, 0, 2] = F[:, 1, 0]
    g_mat[:, 1, 1] = F[:, 0, 1]
    g_mat[:, 1, 3] = F[:, 1, 1]
    g_mat[:, 2, 0] = F[:, 0, 1]
    g_mat[:, 2, 1] = F[:, 0, 0]
    g_mat[:, 2, 2] = F[:, 1, 1]
    g_mat[:, 2, 3] = F[:, 1, 0]
    dpsidf = np.einsum("nca,nc->na", g_mat, s)
    h = np.empty((len(tris), 3, 2))
    h[:, 1, :] = dminv[:, 0, :]
    h[:, 2, :] = dminv[:, 1, :]
    h[:, 0, :] = -h[:, 1, :] - h[:, 2, :]
    gn = areas[:, None, None] * np.einsum("edj,eaj->ead",
                                          dpsidf.reshape(-1, 2, 2), h)
    hess_vals = None
    if need_hess:
        kmat = stiffness_many(model, strains)
        m4 = np.einsum("nia,nij,njb->nab", g_mat, kmat, g_mat)
        m4 = m4 + np.einsum("nc,cab->nab", s, _D2E)
        m5 = m4.reshape(-1, 2, 2, 2, 2)
        hess_vals = areas[:, None, None, None, None] * np.einsum(
            "edjfl,eaj,ebl->eadbf", m5, h, h)
        hess_vals = hess_vals.reshape(-1, 6, 6)
    return total, gn, hess_vals, float(det.min())


def coarse_simulate(model: EnergyModel, mesh, dirichlet, *, tol=1e-8,
                    max_iters=100) -> np.ndarray:
    """Static equilibrium of a coarse triangle mesh whose constitutive
    law is the fitted energy model.

    ``mesh``: Tile or (vertices, triangles); ``dirichlet``: mapping
    node -> prescribed 2-vector displacement; all other boundary is
    zero-traction.  Gradient tolerance is ``tol`` times
    max(1, |stiffness(0)|_F).  Returns final node positions; raises
    NonConverged with diagnostics.
    """
    if hasattr(mesh, "vertices"):
        verts, tris = np.asarray(mesh.vertices, float), np.asarray(mesh.triangles)
    else:
        verts, tris = np.asarray(mesh[0], float), np.asarray(mesh[1])
    rest = verts[tris]
    dm = np.stack((rest[:, 1] - rest[:, 0], rest[:, 2] - rest[:, 0]), axis=-1)
    det = dm[:, 0, 0] * dm[:, 1, 1] - dm[:, 0, 1] * dm[:, 1, 0]
    areas = 0.5 * det
    dminv = np.linalg.inv(dm)

    u = np.zeros_like(verts)
    fixed = np.zeros(verts.shape, dtype=bool)
    for node, disp in dirichlet.items():
        u[int(node)] = np.asarray(disp, dtype=float)
        fixed[int(node)] = True
    free = ~fixed.reshape(-1)
    n_free = int(free.sum())
    idx = -np.ones(len(verts) * 2, dtype=np.int64)
    idx[free] = np.arange(n_free)
    dofs = idx.reshape(-1, 2)[tris].reshape(-1, 6)
    rows = np.repeat(dofs, 6, axis=1).reshape(-1, 6, 6)
    cols = np.tile(dofs, (1, 6)).reshape(-1, 6, 6)
    mask = (rows >= 0) & (cols >= 0)

    scale = max(1.0, float(np.linalg.norm(stiffness(model, np.zeros(3)))))
    gtol = tol * scale

    def reduced_grad(gn):
        g = np.zeros(n_free)
        nodal = idx.reshape(-1, 2)[tris]
        sel = nodal >= 0
        np.add.at(g, nodal[sel], gn[sel])
        return g

    total, gn, _, min_det = _coarse_fields(model, verts, tris, dminv, areas, u, False)
    if not np.isfinite(total):
        raise NonConverged(f"initial state inverted (min det {min_det:.3e})")
    grad = reduced_grad(gn)
    for it in range(max_iters):
        if n_free == 0 or np.linalg.norm(grad, np.inf) <= gtol:
            return verts + u
        _, _, hv, _ = _coarse_fields(model, verts, tris, dminv, areas, u, True)
        hmat = scipy.sparse.coo_matrix((hv[mask], (rows[mask], cols[mask])),
                                       shape=(n_free, n_free)).tocsc()
        shift = 0.0
        step = None
        for _ in range(16):
            try:
                lu, is_pd = _factor_spd(hmat if shift == 0.0 else
                                        hmat + shift * scipy.sparse.identity(n_free, format="csc"))
            except RuntimeError:
                is_pd = False
            if is_pd:
                step = lu.solve(-grad)
                break
            shift = max(shift * 100.0, 1e-8 * scale)
        if step is None:
            raise NonConverged(f"indefinite coarse Hessian at iteration {it}")
        du = np.zeros_like(u).reshape(-1)
        du[free] = step
        du = du.reshape(-1, 2)
        alpha, accepted = 1.0, False
        slope = min(step @ grad, 0.0)
        slack = 16.0 * np.finfo(float).eps * max(1.0, abs(total))
        while alpha > 1e-14:
            t2, gn2, _, _ = _coarse_fields(model, verts, tris, dminv, areas,
                                           u + alpha * du, False)
            if np.isfinite(t2) and t2 <= total + 1e-4 * alpha * slope + slack:
                u = u + alpha * du
                total, gn = t2, gn2
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            raise NonConverged(f"line search failed at iteration {it} "
                               f"(grad {np.linalg.norm(grad, np.inf):.3e})")
        grad = reduced_grad(gn)
    if np.linalg.norm(grad, np.inf) <= gtol:
        return verts + u
    raise NonConverged(f"no convergence in {max_iters} iterations "
                       f"(grad {np.linalg.norm(grad, np.inf):.3e}, tol {gtol:.3e})")


def quad_mesh(nx, ny, size_x, size_y, origin=(0.0, 0.0)):
    """nx x ny quad grid split into triangles (coarse-simulation input)."""
    xs = np.linspace(origin[0], origin[0] + size_x, nx + 1)
    ys = np.linspace(origin[1], origin[1] + size_y, ny + 1)
    verts = np.array([(x, y) for y in ys for x in xs])
    tris = []
    for iy in range(ny):
        for ix in range(nx):
            v00 = iy * (nx + 1) + ix
            v10, v01 = v00 + 1, v00 + nx + 1
            v11 = v01 + 1
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    return verts, np.array(tris, dtype=np.int64)


# ---------------------------------------------------------------------------
# extrapolation splits
# ---------------------------------------------------------------------------

def split_samples(samples, records, split):
    """Partition samples by protocol metadata.

    ``lower-half-stretch``: train on lambda1 below the range midpoint;
    ``half-directions``: train on theta below the direction midpoint.
    """
    if len(samples) != len(records):
        raise ValueError("samples and records must align")
    if split == "lower-half-stretch":
        vals = np.array([r["lambda1"] for r in records])
    elif split == "half-directions":
        vals = np.array([r["theta"] for r in records])
    else:
        raise ValueError(f"unknown split {split!r}")
    mid = 0.5 * (vals.min() + vals.max())
    train = [s for s, v in zip(samples, vals) if v <= mid]
    test = [s for s, v in zip(samples, vals) if v > mid]
    if not train or not test:
        raise DegenerateData(f"split {split!r} leaves an empty subset")
    return train, test


def extrapolation_experiment(samples, records, split, config: FitConfig):
    """Greedy-fit the train subset; report mean stress/stiffness error
    percentages on both subsets (each with its own RMS normalizers)."""
    train, test = split_samples(samples, records, split)
    model, fit_report = greedy_fit(train, config)
    rep_train = error_table(model, train)
    rep_test = error_table(model, test)
    train_err = float(np.nanmean([rep_train.stress_error_pct, rep_train.stiffness_error_pct]))
    test_err = float(np.nanmean([rep_test.stress_error_pct, rep_test.stiffness_error_pct]))
    detail = {"split": split, "n_train": len(train), "n_test": len(test),
              "train": {"stress_error_pct": rep_train.stress_error_pct,
                        "stiffness_error_pct": rep_train.stiffness_error_pct},
              "test": {"stress_error_pct": rep_test.stress_error_pct,
                       "stiffness_error_pct": rep_test.stiffness_error_pct},
              "n_rbfs": fit_report.n_rbfs}
    return train_err, test_err, model, detail

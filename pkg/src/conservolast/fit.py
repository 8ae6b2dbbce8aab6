"""Least-squares coefficient estimation and greedy metaparameter search.

Coefficients (stiffness offset, gradient vectors, symmetric Hessian
matrices) enter stress and stiffness linearly, so fitting them to
target data is one normal-equation solve per candidate.  The stress
offset is eliminated analytically (zero stress at zero strain) before
assembly.  Centers come from seeded k-means over the training strains;
the kernel radius is swept over a grid scaled by the center spacing;
RBFs are added one at a time until the mean of the stress and
stiffness error percentages drops below the target.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import backend
from .errors import (AllIllConditioned, DegenerateData, DuplicateCenters,
                     IllConditioned)
from .kernels import FAMILIES, Kernel
from .model import EnergyModel, stiffness_many, stress_many

_SYM_I = np.array([0, 0, 0, 1, 1, 2])
_SYM_J = np.array([0, 1, 2, 1, 2, 2])
_FROB_W = np.array([1.0, np.sqrt(2.0), np.sqrt(2.0), 1.0, np.sqrt(2.0), 1.0])


@dataclass
class TrainingSample:
    """One (strain, target stress, target stiffness) triple.

    ``target_stiffness`` is None for samples flagged at bifurcations,
    where the homogenized tangent is unavailable.
    """

    strain: np.ndarray
    target_stress: np.ndarray
    target_stiffness: np.ndarray | None = None
    flag: str = "ok"

    def __post_init__(self):
        self.strain = np.asarray(self.strain, dtype=float).reshape(3)
        self.target_stress = np.asarray(self.target_stress, dtype=float).reshape(3)
        if self.target_stiffness is not None:
            k = np.asarray(self.target_stiffness, dtype=float).reshape(3, 3)
            scale = max(1.0, float(np.linalg.norm(k)))
            if np.linalg.norm(k - k.T) > 1e-8 * scale:
                raise ValueError("target stiffness is not symmetric within 1e-8 relative")
            self.target_stiffness = 0.5 * (k + k.T)


@dataclass
class FitConfig:
    max_rbfs: int = 19
    target_error: float = 0.05
    radius_grid: tuple = tuple(np.logspace(np.log10(0.1), np.log10(10.0), 16))
    kernel_family: str = "multiquadric"
    kmeans_seed: int = 0
    kmeans_restarts: int = 1
    condition_limit: float = 1e12

    def __post_init__(self):
        grid = tuple(float(g) for g in self.radius_grid)
        if not grid or any(g <= 0 for g in grid) or list(grid) != sorted(grid):
            raise ValueError("radius_grid must be nonempty, positive, sorted ascending")
        self.radius_grid = grid
        if self.kernel_family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.kernel_family!r}")
        if self.max_rbfs < 1:
            raise ValueError("max_rbfs must be positive")


@dataclass
class FitReport:
    stress_error_pct: float
    stiffness_error_pct: float
    mean_error_pct: float
    per_sample_errors: list
    n_rbfs: int
    chosen_radius: float
    condition_estimate: float
    s_rms: float
    k_rms: float
    objective: float
    sweep: list = field(default_factory=list)
    history: list = field(default_factory=list)


def rms_normalizers(samples):
    """Root-mean-square norms of the stress and stiffness targets."""
    if not samples:
        raise DegenerateData("no training samples")
    s2 = np.mean([s.target_stress @ s.target_stress for s in samples])
    kk = [np.sum(s.target_stiffness ** 2) for s in samples if s.target_stiffness is not None]
    k2 = np.mean(kk) if kk else 0.0
    s_rms, k_rms = float(np.sqrt(s2)), float(np.sqrt(k2))
    if s_rms == 0.0 or k_rms == 0.0:
        raise DegenerateData("zero RMS stress or stiffness target")
    return s_rms, k_rms


def _check_centers(centers):
    centers = np.asarray(centers, dtype=float).reshape(-1, 3)
    for i in range(len(centers)):
        for j in range(i + 1, len(centers)):
            if np.linalg.norm(centers[i] - centers[j]) <= 1e-9:
                raise DuplicateCenters(f"centers {i} and {j} coincide")
    return centers


def _solve_normal(A, b, condition_limit):
    """Cholesky solve of the normal equations with a Tikhonov fallback.

    Returns (params, condition_estimate); the estimate is the squared
    ratio of extreme Cholesky diagonal entries, a cheap proxy for the
    normal-matrix condition number.
    """
    N = A.T @ A
    rhs = A.T @ b
    p = N.shape[0]
    try:
        L = scipy.linalg.cholesky(N, lower=True)
    except scipy.linalg.LinAlgError:
        N = N + (1e-12 * np.trace(N) / p) * np.eye(p)
        try:
            L = scipy.linalg.cholesky(N, lower=True)
        except scipy.linalg.LinAlgError:
            raise IllConditioned(np.inf, condition_limit)
    diag = np.diag(L)
    cond = float((diag.max() / diag.min()) ** 2)
    if cond > condition_limit:
        raise IllConditioned(cond, condition_limit)
    params = scipy.linalg.cho_solve((L, True), rhs)
    return params, cond


def _unpack_params(params, k, use_koff, use_grad, use_hess):
    col = 0
    k_off = np.zeros((3, 3))
    if use_koff:
        for q in range(6):
            a, b = _SYM_I[q], _SYM_J[q]
            k_off[a, b] = params[col]
            k_off[b, a] = params[col]
            col += 1
    gradc = None
    if use_grad:
        gradc = params[col:col + 3 * k].reshape(k, 3).copy()
        col += 3 * k
    hessc = None
    if use_hess:
        hessc = np.zeros((k, 3, 3))
        for i in range(k):
            for q in range(6):
                a, b = _SYM_I[q], _SYM_J[q]
                hessc[i, a, b] = params[col]
                hessc[i, b, a] = params[col]
                col += 1
    return k_off, gradc, hessc


def _assemble(samples, centers, kernel, use_koff, use_grad, use_hess,
              fit_stress, fit_stiffness, s_rms, k_rms):
    strains = np.ascontiguousarray([s.strain for s in samples])
    S, K = backend.design_blocks(kernel.code, kernel.radius,
                                 np.ascontiguousarray(centers), strains,
                                 use_koff, use_grad, use_hess)
    rows, targets = [], []
    if fit_stress:
        rows.append(S.reshape(-1, S.shape[2]) / s_rms)
        targets.append(np.concatenate([s.target_stress for s in samples]) / s_rms)
    if fit_stiffness:
        have = [i for i, s in enumerate(samples) if s.target_stiffness is not None]
        if have:
            Kw = K[have] * (_FROB_W / k_rms)[None, :, None]
            rows.append(Kw.reshape(-1, K.shape[2]))
            tk = np.array([samples[i].target_stiffness[_SYM_I, _SYM_J] for i in have])
            targets.append((tk * _FROB_W / k_rms).ravel())
    A = np.vstack(rows)
    b = np.concatenate(targets)
    return A, b


def _report_errors(model, samples, s_rms, k_rms):
    strains = np.array([s.strain for s in samples])
    ds = stress_many(model, strains) - np.array([s.target_stress for s in samples])
    stress_sq = np.einsum("nc,nc->n", ds, ds)
    pred_k = stiffness_many(model, strains)
    per_sample, stiff_sq = [], []
    for i, s in enumerate(samples):
        sp = 100.0 * np.sqrt(stress_sq[i]) / s_rms
        if s.target_stiffness is not None and k_rms > 0:
            dk = pred_k[i] - s.target_stiffness
            kq = float(np.sum(dk * dk))
            stiff_sq.append(kq)
            kp = 100.0 * np.sqrt(kq) / k_rms
        else:
            kp = float("nan")
        per_sample.append({"stress_pct": float(sp), "stiffness_pct": float(kp)})
    stress_pct = 100.0 * np.sqrt(stress_sq.mean()) / s_rms
    stiff_pct = 100.0 * np.sqrt(np.mean(stiff_sq)) / k_rms if stiff_sq else float("nan")
    objective = float(np.sum(stress_sq) / s_rms ** 2
                      + (np.sum(stiff_sq) / k_rms ** 2 if stiff_sq else 0.0))
    return float(stress_pct), float(stiff_pct), per_sample, objective


def solve_coefficients(samples, centers, kernel, *, use_grad=True, use_hess=True,
                       use_stiffness_offset=True, fit_stress=True, fit_stiffness=True,
                       condition_limit=1e12):
    """Fit all free coefficients by linear least squares.

    Returns (EnergyModel, FitReport).  Raises IllConditioned when the
    normal-equation condition proxy exceeds ``condition_limit``.
    """
    centers = _check_centers(centers)
    if not samples:
        raise DegenerateData("no training samples")
    s_rms, k_rms = rms_normalizers(samples)
    A, b = _assemble(samples, centers, kernel, use_stiffness_offset, use_grad,
                     use_hess, fit_stress, fit_stiffness, s_rms, k_rms)
    params, cond = _solve_normal(A, b, condition_limit)
    k_off, gradc, hessc = _unpack_params(params, len(centers), use_stiffness_offset,
                                         use_grad, use_hess)
    from .model import recompute_stress_offset
    model = EnergyModel(kernel=kernel, centers=centers,
                        grad_coeffs=gradc if use_grad else None,
                        hess_coeffs=hessc if use_hess else None,
                        stress_offset=np.zeros(3), stiffness_offset=k_off)
    model = recompute_stress_offset(model)
    stress_pct, stiff_pct, per_sample, objective = _report_errors(model, samples, s_rms, k_rms)
    mean_pct = np.nanmean([stress_pct, stiff_pct])
    report = FitReport(stress_error_pct=stress_pct, stiffness_error_pct=stiff_pct,
                       mean_error_pct=float(mean_pct), per_sample_errors=per_sample,
                       n_rbfs=len(centers), chosen_radius=kernel.radius,
                       condition_estimate=cond, s_rms=s_rms, k_rms=k_rms,
                       objective=objective)
    return model, report


def kmeans_centers(samples, k, seed, restarts=1):
    """Deterministic k-means++ / Lloyd centroids of the training strains."""
    if hasattr(samples[0], "strain"):
        pts = np.array([s.strain for s in samples])
    else:
        pts = np.asarray(samples, dtype=float).reshape(-1, 3)
    distinct = np.unique(pts, axis=0)
    if k > len(distinct):
        raise DegenerateData(f"k={k} exceeds {len(distinct)} distinct strains")
    best = None
    for r in range(max(1, restarts)):
        centers, wcss = _lloyd(pts, k, seed + 1000003 * r)
        if best is None or wcss < best[1]:
            best = (centers, wcss)
    return best[0]


def _lloyd(pts, k, seed):
    rng = np.random.Generator(np.random.PCG64(seed))
    n = len(pts)
    centers = np.empty((k, 3))
    centers[0] = pts[rng.integers(n)]
    d2 = np.sum((pts - centers[0]) ** 2, axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[i] = pts[rng.integers(n)]
        else:
            centers[i] = pts[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((pts - centers[i]) ** 2, axis=1))
    assign = np.full(n, -1)
    for _ in range(200):
        dist = np.sum((pts[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        new_assign = dist.argmin(axis=1)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for i in range(k):
            mask = assign == i
            if mask.any():
                centers[i] = pts[mask].mean(axis=0)
            else:
                far = dist[np.arange(n), assign].argmax()
                centers[i] = pts[far]
                assign[far] = i
    wcss = float(np.sum((pts - centers[assign]) ** 2))
    return centers, wcss


def _radius_scale(centers, strains):
    centers = np.asarray(centers, dtype=float).reshape(-1, 3)
    if len(centers) >= 2:
        dist = np.linalg.norm(centers[:, None, :] - centers[None, :, :], axis=2)
        np.fill_diagonal(dist, np.inf)
        return float(dist.min(axis=1).mean())
    span = np.linalg.norm(strains - strains.mean(axis=0), axis=1).max()
    return float(span) if span > 0 else 1.0


def sweep_radius(samples, centers, family, radius_grid, *, condition_limit=1e12,
                 **solve_kwargs):
    """Fit at every radius candidate; keep the feasible one with the
    smallest least-squares objective.

    Candidates are grid multipliers times the mean nearest-neighbor
    center distance (times the data bounding radius for one center).
    """
    centers = _check_centers(centers)
    strains = np.array([s.strain for s in samples])
    scale = _radius_scale(centers, strains)
    candidates = [float(m) * scale for m in radius_grid]

    def attempt(radius):
        try:
            m, rep = solve_coefficients(samples, centers, Kernel(family, radius),
                                        condition_limit=condition_limit, **solve_kwargs)
            return m, rep
        except IllConditioned as exc:
            return None, exc

    threads = backend.max_threads()
    if threads > 1 and len(candidates) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(attempt, candidates))
    else:
        results = [attempt(r) for r in candidates]

    trace, best = [], None
    for radius, (m, rep) in zip(candidates, results):
        if m is None:
            trace.append({"radius": radius, "feasible": False,
                          "mean_error_pct": None, "objective": None,
                          "condition_estimate": rep.estimate})
            continue
        trace.append({"radius": radius, "feasible": True,
                      "mean_error_pct": rep.mean_error_pct,
                      "objective": rep.objective,
                      "condition_estimate": rep.condition_estimate})
        if best is None or rep.objective < best[2].objective:
            best = (radius, m, rep)
    if best is None:
        raise AllIllConditioned(f"all {len(candidates)} radius candidates ill-conditioned")
    radius, m, rep = best
    rep.sweep = trace
    return radius, m, rep


def greedy_fit(samples, config: FitConfig):
    """Add RBFs one at a time, sweeping the radius at each count, until
    the mean stress/stiffness error percentage meets the target."""
    strains = np.array([s.strain for s in samples])
    n_distinct = len(np.unique(strains, axis=0))
    best = None
    history = []
    failures = 0
    k_max = min(config.max_rbfs, n_distinct)
    for k in range(0, k_max + 1):
        try:
            if k == 0:
                model, rep = solve_coefficients(
                    samples, np.zeros((0, 3)), Kernel(config.kernel_family, 1.0),
                    condition_limit=config.condition_limit)
                radius = 1.0
            else:
                centers = kmeans_centers(samples, k, config.kmeans_seed,
                                         config.kmeans_restarts)
                radius, model, rep = sweep_radius(
                    samples, centers, config.kernel_family, config.radius_grid,
                    condition_limit=config.condition_limit)
        except (IllConditioned, AllIllConditioned) as exc:
            failures += 1
            history.append({"n_rbfs": k, "feasible": False, "error": str(exc)})
            continue
        history.append({"n_rbfs": k, "feasible": True,
                        "stress_error_pct": rep.stress_error_pct,
                        "stiffness_error_pct": rep.stiffness_error_pct,
                        "mean_error_pct": rep.mean_error_pct,
                        "chosen_radius": radius,
                        "sweep": rep.sweep})
        if best is None or rep.mean_error_pct < best[1].mean_error_pct:
            best = (model, rep)
        if best[1].mean_error_pct <= 100.0 * config.target_error:
            break
    if best is None:
        raise AllIllConditioned(f"every RBF count up to {k_max} was ill-conditioned")
    model, rep = best
    rep.history = history
    return model, rep

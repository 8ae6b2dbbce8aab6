"""Periodic-tile homogenization: equilibria, coarse stress/stiffness,
and the directional-stretch sampling protocol.

A tile deforms as x = F X + u with u periodic (slave nodes share their
master's displacement dofs) and one master pinned to remove rigid
translation.  Newton minimization with backtracking and an
element-inversion barrier finds u*.  At the equilibrium:

* coarse stress is the envelope-theorem derivative of the energy
  density with respect to macro Green strain (the u-gradient vanishes
  on the constraint manifold), evaluated through the average first
  Piola-Kirchhoff stress;
* coarse tangent stiffness is the implicit-function-theorem Schur
  complement  K = Psi_EE - Psi_Eu H^-1 Psi_uE  on reduced coordinates.

Training data follows the protocol: principal stretch lambda1 is swept
over its range for each stretch direction theta, the orthogonal
stretch lambda2* with zero orthogonal stress is found by a safeguarded
root search (re-equilibrating at every evaluation), and each grid
point emits samples at lambda2* and lambda2* +/- 0.05.
"""

from __future__ import annotations

import weakref
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse
import scipy.sparse.linalg
from scipy.optimize import brentq

from . import backend
from .errors import NoBracket, NonConverged, SingularReducedHessian
from .fit import TrainingSample
from .material import NeoHookean
from .model import green_strain
from .tiles import Tile

_LAMBDA2_BRACKET = (0.3, 2.5)


@dataclass(frozen=True)
class MacroDeformation:
    """Principal stretches and stretch direction; F = R diag(l1,l2) R^T."""

    lambda1: float
    lambda2: float
    theta: float = 0.0

    def __post_init__(self):
        if self.lambda1 <= 0.0 or self.lambda2 <= 0.0:
            raise ValueError("principal stretches must be positive")

    def deformation_gradient(self) -> np.ndarray:
        c, s = np.cos(self.theta), np.sin(self.theta)
        r = np.array([[c, -s], [s, c]])
        return r @ np.diag([self.lambda1, self.lambda2]) @ r.T

    def green(self) -> np.ndarray:
        return green_strain(self.deformation_gradient())


@dataclass
class EquilibriumState:
    displacements: np.ndarray      # (n_nodes, 2), periodic by construction
    energy_density: float
    converged: bool
    newton_iters: int
    grad_norm: float
    pbar: np.ndarray               # area-weighted sum of element PK1 stresses
    u_red: np.ndarray = field(repr=False, default=None)


class _FemTile:
    """Precomputed FEM structure for one Tile (cached per tile object)."""

    def __init__(self, tile: Tile):
        self.vertices = np.asarray(tile.vertices, dtype=float)
        self.triangles = np.ascontiguousarray(tile.triangles, dtype=np.int64)
        rest = self.vertices[self.triangles]
        dm = np.stack((rest[:, 1] - rest[:, 0], rest[:, 2] - rest[:, 0]), axis=-1)
        det = dm[:, 0, 0] * dm[:, 1, 1] - dm[:, 0, 1] * dm[:, 1, 0]
        self.areas = 0.5 * det
        inv = np.empty_like(dm)
        inv[:, 0, 0] = dm[:, 1, 1]
        inv[:, 0, 1] = -dm[:, 0, 1]
        inv[:, 1, 0] = -dm[:, 1, 0]
        inv[:, 1, 1] = dm[:, 0, 0]
        self.dminv = np.ascontiguousarray(inv / det[:, None, None])
        young = np.asarray(tile.young, dtype=float)
        poisson = np.asarray(tile.poisson, dtype=float)
        self.mu = np.ascontiguousarray(young / (2.0 * (1.0 + poisson)))
        self.lam = np.ascontiguousarray(
            young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson)))
        self.tile_area = float(tile.period[0] * tile.period[1])
        self.stiffness_scale = float(np.mean(self.mu + self.lam))

        nv = len(self.vertices)
        root = np.arange(nv)
        for slave, master, _ in tile.periodic_pairs:
            root[slave] = master
        for v in range(nv):                      # resolve chains
            r = v
            seen = 0
            while root[r] != r:
                r = root[r]
                seen += 1
                if seen > nv:
                    raise ValueError("cyclic periodic pairing")
            root[v] = r
        self.root = root
        masters = np.unique(root)
        self.pinned = int(masters[0])
        dof_map = np.full((nv, 2), -1, dtype=np.int64)
        red = 0
        for mnode in masters:
            if mnode == self.pinned:
                continue
            dof_map[mnode, 0] = red
            dof_map[mnode, 1] = red + 1
            red += 2
        dof_map[root != np.arange(nv)] = dof_map[root[root != np.arange(nv)]]
        self.dof_map = np.ascontiguousarray(dof_map)
        self.n_red = red

        dofs = self.dof_map[self.triangles].reshape(-1, 6)
        rows = np.repeat(dofs, 6, axis=1).reshape(-1, 6, 6)
        cols = np.tile(dofs, (1, 6)).reshape(-1, 6, 6)
        self.h_mask = (rows >= 0) & (cols >= 0)
        self.h_rows = rows[self.h_mask]
        self.h_cols = cols[self.h_mask]

    def positions(self, fmat, u_red):
        u = np.zeros((len(self.vertices), 2))
        active = self.dof_map[:, 0] >= 0
        u[active, 0] = u_red[self.dof_map[active, 0]]
        u[active, 1] = u_red[self.dof_map[active, 1]]
        return self.vertices @ fmat.T + u, u

    def hessian(self, x):
        vals = backend.fem_hess_vals(x, self.triangles, self.dminv, self.areas,
                                     self.mu, self.lam)
        mat = scipy.sparse.coo_matrix(
            (vals[self.h_mask], (self.h_rows, self.h_cols)),
            shape=(self.n_red, self.n_red))
        return mat.tocsc()


_FEM_CACHE: "weakref.WeakKeyDictionary[Tile, _FemTile]" = weakref.WeakKeyDictionary()


def _fem(tile: Tile) -> _FemTile:
    sys = _FEM_CACHE.get(tile)
    if sys is None:
        sys = _FemTile(tile)
        _FEM_CACHE[tile] = sys
    return sys


def _factor_spd(mat):
    """SuperLU factorization arranged so diag(U) > 0 certifies positive
    definiteness of the symmetric input."""
    lu = scipy.sparse.linalg.splu(mat, diag_pivot_thresh=0.0,
                                  permc_spec="MMD_AT_PLUS_A")
    return lu, bool(np.all(lu.U.diagonal() > 0.0))


def equilibrate(tile: Tile, macro: MacroDeformation, warm_start=None, *,
                tol_scale=1.0, max_iters=200) -> EquilibriumState:
    """Minimize tile energy over periodic displacements at fixed macro
    deformation; returns the state with a convergence flag (never raises
    on non-convergence)."""
    fem = _fem(tile)
    fmat = macro.deformation_gradient()
    if warm_start is not None and warm_start.u_red is not None \
            and len(warm_start.u_red) == fem.n_red:
        u_red = warm_start.u_red.copy()
    else:
        u_red = np.zeros(fem.n_red)
    tol = 1e-9 * tol_scale * len(fem.triangles) * fem.stiffness_scale

    x, _ = fem.positions(fmat, u_red)
    energy, min_det, pbar, grad = backend.fem_grad(
        x, fem.triangles, fem.dminv, fem.areas, fem.mu, fem.lam, fem.dof_map)
    if not np.isfinite(energy):
        # rest-shaped start inverted by the macro map should not happen
        # for admissible stretches; report as non-converged
        return _state(fem, fmat, u_red, np.inf, False, 0, np.inf, pbar)

    iters = 0
    converged = np.linalg.norm(grad, np.inf) <= tol if fem.n_red else True
    while not converged and iters < max_iters:
        iters += 1
        h = fem.hessian(x)
        shift = 0.0
        step = None
        for _ in range(16):
            try:
                lu, is_pd = _factor_spd(h if shift == 0.0 else
                                        h + shift * scipy.sparse.identity(fem.n_red, format="csc"))
            except RuntimeError:
                is_pd = False
            if is_pd:
                step = lu.solve(-grad)
                break
            shift = max(shift * 100.0, 1e-8 * fem.stiffness_scale)
        if step is None:
            break

        # Armijo with an absolute rounding slack: near the minimum the
        # true decrease drops below the float resolution of the energy.
        alpha = 1.0
        base = energy
        slope = min(step @ grad, 0.0)
        slack = 16.0 * np.finfo(float).eps * max(1.0, abs(base))
        gnorm0 = np.linalg.norm(grad, np.inf)
        accepted = False
        while alpha > 1e-14:
            trial = u_red + alpha * step
            xt, _ = fem.positions(fmat, trial)
            et, det_t = backend.fem_energy(xt, fem.triangles, fem.dminv,
                                           fem.areas, fem.mu, fem.lam)
            if np.isfinite(et) and det_t > 0.0 \
                    and et <= base + 1e-4 * alpha * slope + slack:
                u_red = trial
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            # gradient-decrease fallback for the rounding-dominated regime
            trial = u_red + step
            xt, _ = fem.positions(fmat, trial)
            et, det_t, pt, gt = backend.fem_grad(
                xt, fem.triangles, fem.dminv, fem.areas, fem.mu, fem.lam, fem.dof_map)
            if np.isfinite(et) and det_t > 0.0 \
                    and np.linalg.norm(gt, np.inf) < 0.5 * gnorm0:
                u_red, x = trial, xt
                energy, min_det, pbar, grad = et, det_t, pt, gt
                converged = np.linalg.norm(grad, np.inf) <= tol
                continue
            break
        x, _ = fem.positions(fmat, u_red)
        energy, min_det, pbar, grad = backend.fem_grad(
            x, fem.triangles, fem.dminv, fem.areas, fem.mu, fem.lam, fem.dof_map)
        converged = np.linalg.norm(grad, np.inf) <= tol

    gnorm = float(np.linalg.norm(grad, np.inf)) if fem.n_red else 0.0
    return _state(fem, fmat, u_red, energy, bool(converged), iters, gnorm, pbar)


def _state(fem, fmat, u_red, energy, converged, iters, gnorm, pbar):
    _, u = fem.positions(fmat, u_red)
    return EquilibriumState(displacements=u, energy_density=energy / fem.tile_area,
                            converged=converged, newton_iters=iters,
                            grad_norm=gnorm, pbar=pbar, u_red=u_red)


def _macro_of(tile, macro_or_strain):
    if isinstance(macro_or_strain, MacroDeformation):
        return macro_or_strain.deformation_gradient()
    return deformation_from_green(np.asarray(macro_or_strain, dtype=float))


def homogenized_stress(tile: Tile, macro_or_strain, state: EquilibriumState) -> np.ndarray:
    """Voigt coarse 2nd Piola-Kirchhoff stress per unit tile area."""
    if not state.converged:
        raise NonConverged("stress requested on a non-converged state", state)
    fem = _fem(tile)
    fmat = _macro_of(tile, macro_or_strain)
    s2 = np.linalg.solve(fmat, state.pbar) / fem.tile_area
    s2 = 0.5 * (s2 + s2.T)
    return np.array([s2[0, 0], s2[1, 1], s2[0, 1]])


def homogenized_stiffness(tile: Tile, macro_or_strain, state: EquilibriumState) -> np.ndarray:
    """Schur-complement coarse tangent dS/dE per unit tile area."""
    if not state.converged:
        raise NonConverged("stiffness requested on a non-converged state", state)
    fem = _fem(tile)
    fmat = _macro_of(tile, macro_or_strain)
    strain = green_strain(fmat)
    x, _ = fem.positions(fmat, state.u_red)

    a_ff, a_fu = backend.fem_coupling(x, fem.triangles, fem.dminv, fem.areas,
                                      fem.mu, fem.lam, fem.dof_map, fem.n_red)
    t_mat = deformation_jacobian(strain)           # (4,3)
    d2f = deformation_second_derivative(strain)    # (4,3,3)
    phi_f = state.pbar.reshape(4)

    k = t_mat.T @ a_ff @ t_mat
    k = k + np.einsum("c,cab->ab", phi_f, d2f)
    if fem.n_red:
        h = fem.hessian(x)
        try:
            lu, is_pd = _factor_spd(h)
        except RuntimeError as exc:
            raise SingularReducedHessian(str(exc))
        if not is_pd:
            raise SingularReducedHessian("reduced Hessian is not positive definite")
        rhs = (t_mat.T @ a_fu).T                   # (n_red, 3)
        sol = lu.solve(rhs)
        k = k - rhs.T @ sol
    k /= fem.tile_area
    if not np.all(np.isfinite(k)):
        raise SingularReducedHessian("non-finite Schur complement")
    return 0.5 * (k + k.T)


# ---------------------------------------------------------------------------
# macro deformation as a function of Voigt Green strain
# ---------------------------------------------------------------------------

def deformation_from_green(strain) -> np.ndarray:
    """Principal (symmetric positive definite) square root of C = I + 2 eps."""
    e1, e2, e3 = strain
    c = np.array([[1.0 + 2.0 * e1, e3], [e3, 1.0 + 2.0 * e2]])
    delta = c[0, 0] * c[1, 1] - c[0, 1] * c[1, 0]
    if delta <= 0.0:
        raise ValueError("strain outside the admissible range: det(C) <= 0")
    s = np.sqrt(delta)
    q = np.sqrt(c[0, 0] + c[1, 1] + 2.0 * s)
    return (c + s * np.eye(2)) / q


def macro_from_green(strain) -> MacroDeformation:
    """Stretches and direction whose symmetric deformation gradient has
    the given Voigt Green strain."""
    f = deformation_from_green(np.asarray(strain, dtype=float))
    w, vecs = np.linalg.eigh(f)
    theta = float(np.arctan2(vecs[1, 0], vecs[0, 0]))
    return MacroDeformation(float(w[0]), float(w[1]), theta)


def _sqrt_scalars(strain):
    e1, e2, e3 = strain
    c = np.array([[1.0 + 2.0 * e1, e3], [e3, 1.0 + 2.0 * e2]])
    delta = c[0, 0] * c[1, 1] - e3 * e3
    s = np.sqrt(delta)
    q = np.sqrt(c[0, 0] + c[1, 1] + 2.0 * s)
    dc = np.array([[[2.0, 0.0], [0.0, 0.0]],
                   [[0.0, 0.0], [0.0, 2.0]],
                   [[0.0, 1.0], [1.0, 0.0]]])
    ddelta = np.array([2.0 * c[1, 1], 2.0 * c[0, 0], -2.0 * e3])
    dtau = np.array([2.0, 2.0, 0.0])
    ds = ddelta / (2.0 * s)
    dq = (dtau + 2.0 * ds) / (2.0 * q)
    return c, s, q, dc, ds, dq, ddelta


def deformation_jacobian(strain) -> np.ndarray:
    """d vec(F) / d E, with vec row-major, shape (4, 3)."""
    c, s, q, dc, ds, dq, _ = _sqrt_scalars(strain)
    f = (c + s * np.eye(2)) / q
    out = np.empty((4, 3))
    for a in range(3):
        dfa = (dc[a] + ds[a] * np.eye(2)) / q - f * (dq[a] / q)
        out[:, a] = dfa.reshape(4)
    return out


def deformation_second_derivative(strain) -> np.ndarray:
    """d^2 vec(F) / dE dE, shape (4, 3, 3), symmetric in the strain axes."""
    c, s, q, dc, ds, dq, ddelta = _sqrt_scalars(strain)
    f = (c + s * np.eye(2)) / q
    d2delta = np.zeros((3, 3))
    d2delta[0, 1] = d2delta[1, 0] = 4.0
    d2delta[2, 2] = -2.0
    d2s = d2delta / (2.0 * s) - np.outer(ddelta, ddelta) / (4.0 * s ** 3)
    d2q = d2s / q - np.outer(dq, dq) / q
    eye = np.eye(2)
    out = np.empty((4, 3, 3))
    for a in range(3):
        for b in range(3):
            term = (d2s[a, b] * eye / q
                    - (dc[a] + ds[a] * eye) * (dq[b] / q ** 2)
                    - (dc[b] + ds[b] * eye) * (dq[a] / q ** 2)
                    + 2.0 * f * (dq[a] * dq[b] / q ** 2)
                    - f * (d2q[a, b] / q))
            out[:, a, b] = term.reshape(4)
    return out


# ---------------------------------------------------------------------------
# orthogonal stretch search and training-data generation
# ---------------------------------------------------------------------------

def orthogonal_stretch_search(tile: Tile, lambda1, theta, warm_start=None, *,
                              lambda2_guess=None, tol_scale=1e-4):
    """Find lambda2 with zero orthogonal coarse stress at (lambda1, theta).

    Safeguarded root search (expanding bracket + Brent) on
    d(energy density)/d(lambda2); each evaluation re-equilibrates the
    tile, warm-started from the previous one.
    """
    fem = _fem(tile)
    v = np.array([-np.sin(theta), np.cos(theta)])
    cache = {"state": warm_start}

    def g(lam2):
        macro = MacroDeformation(lambda1, lam2, theta)
        state = equilibrate(tile, macro, cache["state"], tol_scale=tol_scale)
        if not state.converged:
            raise NonConverged(f"equilibrate failed at lambda2={lam2:.4f}", state)
        cache["state"] = state
        return float(v @ state.pbar @ v) / fem.tile_area

    lo, hi = _LAMBDA2_BRACKET
    x0 = float(np.clip(lambda2_guess if lambda2_guess is not None else 1.0, lo, hi))
    g0 = g(x0)
    if g0 == 0.0:
        return x0, cache["state"]
    step = 0.08
    a, ga = x0, g0
    b, gb = x0, g0
    # walk in the direction that should flip the sign of the residual
    for _ in range(64):
        if ga > 0.0 and a > lo:
            a = max(lo, a - step)
            ga = g(a)
        elif gb < 0.0 and b < hi:
            b = min(hi, b + step)
            gb = g(b)
        else:
            break
        step *= 1.5
        if ga <= 0.0 <= gb:
            break
    if not (ga <= 0.0 <= gb):
        raise NoBracket(f"no sign change of orthogonal stress in {(_LAMBDA2_BRACKET)}")
    lam2 = float(brentq(g, a, b, xtol=1e-10))
    resid = g(lam2)
    scale = fem.stiffness_scale
    if abs(resid) > 1e-8 * scale:
        raise NonConverged(
            f"orthogonal stress residual {resid:.3e} above 1e-8*scale", cache["state"])
    return lam2, cache["state"]


@dataclass
class SamplingGrid:
    lambda1_lo: float = 0.9
    lambda1_hi: float = 2.0
    n_lambda1: int = 12
    n_theta: int = 12
    ortho_offset: float = 0.05

    def lambda1_values(self):
        return np.linspace(self.lambda1_lo, self.lambda1_hi, self.n_lambda1)

    def theta_values(self):
        return np.linspace(0.0, np.pi, self.n_theta, endpoint=False)


def generate_training_data(tile: Tile, grid: SamplingGrid | None = None):
    """Run the directional-stretch protocol over the grid.

    Returns (samples, records, log): one TrainingSample and one metadata
    record dict per emitted deformation (3 per grid point), plus a list
    of per-point diagnostics; individual failures are logged, never
    fatal for the rest of the grid.
    """
    grid = grid or SamplingGrid()
    thetas = grid.theta_values()
    threads = backend.max_threads()
    if threads > 1 and len(thetas) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_theta = list(pool.map(
                lambda th: _sweep_theta(tile, th, grid), thetas))
    else:
        per_theta = [_sweep_theta(tile, th, grid) for th in thetas]

    samples, records, log = [], [], []
    for th_samples, th_records, th_log in per_theta:
        samples.extend(th_samples)
        records.extend(th_records)
        log.extend(th_log)
    return samples, records, log


def _sweep_theta(tile, theta, grid):
    lambdas = grid.lambda1_values()
    start = int(np.argmin(np.abs(lambdas - 1.0)))
    order = list(range(start, len(lambdas))) + list(range(start - 1, -1, -1))
    results = {}
    log = []
    warm = {"up": (None, None), "down": (None, None)}
    for idx in order:
        direction = "up" if idx >= start else "down"
        guess, wstate = warm[direction]
        lam1 = float(lambdas[idx])
        try:
            lam2, state = orthogonal_stretch_search(
                tile, lam1, theta, warm_start=wstate, lambda2_guess=guess)
        except (NoBracket, NonConverged) as exc:
            log.append({"lambda1": lam1, "theta": float(theta),
                        "event": "search_failed", "detail": str(exc)})
            warm[direction] = (None, None)
            continue
        warm[direction] = (lam2, state)
        if direction == "up" and idx == start:
            warm["down"] = (lam2, state)
        prev = results.get(idx - 1 if direction == "up" else idx + 1)
        if prev is not None:
            e0, e1 = prev[1].energy_density, state.energy_density
            if abs(e1 - e0) > 0.2 * max(abs(e0), abs(e1), 1e-12):
                log.append({"lambda1": lam1, "theta": float(theta),
                            "event": "branch_jump",
                            "detail": f"energy {e0:.4e} -> {e1:.4e}"})
        results[idx] = (lam2, state)

    samples, records = [], []
    for idx in range(len(lambdas)):
        if idx not in results:
            continue
        lam1 = float(lambdas[idx])
        lam2_star, star_state = results[idx]
        for branch, lam2 in (("star", lam2_star),
                             ("plus", lam2_star + grid.ortho_offset),
                             ("minus", lam2_star - grid.ortho_offset)):
            macro = MacroDeformation(lam1, lam2, float(theta))
            try:
                state = (star_state if branch == "star" else
                         equilibrate(tile, macro, star_state, tol_scale=1e-3))
                if not state.converged:
                    raise NonConverged("branch equilibrate failed", state)
                stress = homogenized_stress(tile, macro, state)
                flag = "ok"
                stiff = None
                try:
                    stiff = homogenized_stiffness(tile, macro, state)
                except SingularReducedHessian:
                    flag = "no_stiffness"
            except (NonConverged, SingularReducedHessian) as exc:
                log.append({"lambda1": lam1, "theta": float(theta),
                            "event": f"sample_failed_{branch}", "detail": str(exc)})
                continue
            samples.append(TrainingSample(strain=macro.green(), target_stress=stress,
                                          target_stiffness=stiff, flag=flag))
            records.append({"lambda1": lam1, "theta": float(theta),
                            "lambda2": float(lam2), "branch": branch,
                            "energy_density": float(state.energy_density),
                            "flag": flag})
    return samples, records, log


def solid_reference(tile: Tile) -> NeoHookean:
    """Analytic base material of a homogeneous tile (homogenization oracle)."""
    young = np.asarray(tile.young, dtype=float)
    poisson = np.asarray(tile.poisson, dtype=float)
    if not (np.all(young == young[0]) and np.all(poisson == poisson[0])):
        raise ValueError("tile is not homogeneous")
    return NeoHookean.from_young_poisson(float(young[0]), float(poisson[0]))

"""Conservative RBF elastic energy model.

The energy density over Voigt Green strain E = (e_xx, e_yy, 2 e_xy) is

    Psi(E) = s_off . E  +  1/2 E^T K_off E
           + sum_i phi(|E - c_i|) * w_i . (E - c_i)          (gradient terms)
           + sum_i phi(|E - c_i|) * (E - c_i)^T W_i (E - c_i) (Hessian terms)

Stress is the analytic gradient and tangent stiffness the analytic
Hessian of Psi, so the stress field is conservative by construction.
The stress offset is never fitted: it is pinned so that stress(0) = 0
exactly (see recompute_stress_offset).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import backend
from .kernels import Kernel


def green_strain(f) -> np.ndarray:
    """Voigt Green strain (e_xx, e_yy, 2 e_xy) of a 2x2 deformation gradient."""
    f = np.asarray(f, dtype=float)
    c = f.T @ f
    return np.array([0.5 * (c[0, 0] - 1.0), 0.5 * (c[1, 1] - 1.0), c[0, 1]])


def _sym_check(mat, name, tol=1e-12):
    mat = np.asarray(mat, dtype=float)
    scale = max(1.0, float(np.linalg.norm(mat)))
    if np.linalg.norm(mat - mat.T) > tol * scale:
        raise ValueError(f"{name} must be symmetric within {tol} relative")
    return 0.5 * (mat + mat.T)


@dataclass(frozen=True)
class EnergyModel:
    """Kernel, shared centers, per-center coefficients and offsets.

    ``grad_coeffs`` (k,3) and ``hess_coeffs`` (k,3,3) may each be None,
    meaning that interpolant family is absent (used by the ablation
    studies); both use the same centers when present.
    """

    kernel: Kernel
    centers: np.ndarray
    grad_coeffs: np.ndarray | None
    hess_coeffs: np.ndarray | None
    stress_offset: np.ndarray
    stiffness_offset: np.ndarray

    def __post_init__(self):
        centers = np.atleast_2d(np.asarray(self.centers, dtype=float)).reshape(-1, 3)
        object.__setattr__(self, "centers", centers)
        k = len(centers)
        for name in ("grad_coeffs", "hess_coeffs"):
            val = getattr(self, name)
            if val is not None:
                val = np.asarray(val, dtype=float)
                expect = (k, 3) if name == "grad_coeffs" else (k, 3, 3)
                val = val.reshape(expect)
                if name == "hess_coeffs":
                    for i in range(k):
                        val[i] = _sym_check(val[i], f"hess_coeffs[{i}]")
                object.__setattr__(self, name, val)
        object.__setattr__(self, "stress_offset",
                           np.asarray(self.stress_offset, dtype=float).reshape(3))
        object.__setattr__(self, "stiffness_offset",
                           _sym_check(self.stiffness_offset, "stiffness_offset"))

    @property
    def n_centers(self) -> int:
        return len(self.centers)

    def param_count(self, count_stress_offset=True, count_stiffness_offset=True) -> int:
        """Free-coefficient count as reported in the comparison tables."""
        n = 0
        if self.grad_coeffs is not None:
            n += 3 * self.n_centers
        if self.hess_coeffs is not None:
            n += 6 * self.n_centers
        if count_stiffness_offset:
            n += 6
        if count_stress_offset:
            n += 3
        return n

    def _coeff_arrays(self):
        k = self.n_centers
        g = self.grad_coeffs if self.grad_coeffs is not None else np.zeros((k, 3))
        h = self.hess_coeffs if self.hess_coeffs is not None else np.zeros((k, 3, 3))
        return g, h


def _eval(model: EnergyModel, strains):
    E = np.atleast_2d(np.asarray(strains, dtype=float))
    g, h = model._coeff_arrays()
    return backend.model_eval_batch(
        model.kernel.code, model.kernel.radius, model.centers, g, h,
        model.stress_offset, model.stiffness_offset, np.ascontiguousarray(E))


def energy(model: EnergyModel, e) -> float:
    return float(_eval(model, e)[0][0])


def stress(model: EnergyModel, e) -> np.ndarray:
    return _eval(model, e)[1][0]


def stiffness(model: EnergyModel, e) -> np.ndarray:
    k = _eval(model, e)[2][0]
    return 0.5 * (k + k.T)


def energy_many(model: EnergyModel, strains) -> np.ndarray:
    return _eval(model, strains)[0]


def stress_many(model: EnergyModel, strains) -> np.ndarray:
    return _eval(model, strains)[1]


def stiffness_many(model: EnergyModel, strains) -> np.ndarray:
    k = _eval(model, strains)[2]
    return 0.5 * (k + np.swapaxes(k, 1, 2))


def rest_energy(model: EnergyModel) -> float:
    """Energy at zero strain; the constant is not normalized away, so
    reports that want Psi(0) = 0 subtract this shift."""
    return energy(model, np.zeros(3))


def recompute_stress_offset(model: EnergyModel) -> EnergyModel:
    """Return a copy whose stress offset makes stress(0) vanish exactly."""
    shifted = replace(model, stress_offset=np.zeros(3))
    s0 = stress(shifted, np.zeros(3))
    return replace(model, stress_offset=-s0)


def work_integral(model: EnergyModel, path) -> float:
    """Trapezoidal line integral of stress along a polyline in strain space.

    Vanishes on closed paths (up to discretization) because the stress
    field is a gradient; on open paths it converges to the energy
    difference between the endpoints.
    """
    path = np.atleast_2d(np.asarray(path, dtype=float))
    if len(path) < 3:
        raise ValueError("work integral path needs at least 3 points")
    s = stress_many(model, path)
    mids = 0.5 * (s[:-1] + s[1:])
    steps = np.diff(path, axis=0)
    return float(np.einsum("ic,ic->", mids, steps))

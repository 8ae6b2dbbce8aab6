"""Compressible Neo-Hookean base material (plane strain).

Per unit reference area, with F the 2x2 deformation gradient and
J = det F:

    psi(F) = mu/2 (|F|^2 - 2) - mu ln J + lam/2 (ln J)^2

Stays monotone under the large stretches of the sampling protocol
(lambda up to 2), unlike St.Venant-Kirchhoff.  The closed forms below
in terms of Voigt Green strain are the homogenization oracle for the
solid tile: second Piola-Kirchhoff stress

    S = mu (I - C^-1) + lam ln J C^-1,   C = I + 2 eps,

and its tangent d(S)/d(E) obtained from dC^-1 = -C^-1 dC C^-1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# strain directions conjugate to the Voigt components (e_xx, e_yy, 2 e_xy)
_DEPS = np.array([
    [[1.0, 0.0], [0.0, 0.0]],
    [[0.0, 0.0], [0.0, 1.0]],
    [[0.0, 0.5], [0.5, 0.0]],
])


@dataclass(frozen=True)
class NeoHookean:
    mu: float
    lam: float

    @classmethod
    def from_young_poisson(cls, young, poisson) -> "NeoHookean":
        mu = young / (2.0 * (1.0 + poisson))
        lam = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson))
        return cls(mu=mu, lam=lam)

    def energy(self, strain) -> float:
        c, det = _right_cauchy(strain)
        lnj = 0.5 * np.log(det)
        return float(0.5 * self.mu * (np.trace(c) - 2.0) - self.mu * lnj
                     + 0.5 * self.lam * lnj * lnj)

    def stress(self, strain) -> np.ndarray:
        """Voigt 2nd Piola-Kirchhoff stress (S_xx, S_yy, S_xy)."""
        c, det = _right_cauchy(strain)
        cinv = _inv2(c, det)
        lnj = 0.5 * np.log(det)
        s = self.mu * (np.eye(2) - cinv) + self.lam * lnj * cinv
        return np.array([s[0, 0], s[1, 1], s[0, 1]])

    def stiffness(self, strain) -> np.ndarray:
        """Voigt tangent dS/dE, 3x3 symmetric."""
        c, det = _right_cauchy(strain)
        cinv = _inv2(c, det)
        lnj = 0.5 * np.log(det)
        coef = self.lam * lnj - self.mu
        k = np.empty((3, 3))
        for b in range(3):
            de = _DEPS[b]
            ds = (-2.0 * coef * cinv @ de @ cinv
                  + self.lam * np.trace(cinv @ de) * cinv)
            k[:, b] = (ds[0, 0], ds[1, 1], ds[0, 1])
        return 0.5 * (k + k.T)

    def uniaxial_lambda2(self, lambda1, bracket=(0.3, 2.5)) -> float:
        """Orthogonal stretch with zero orthogonal stress under principal
        stretch ``lambda1`` (closed-form residual, bisection-refined)."""
        from scipy.optimize import brentq

        def ortho_stress(lam2):
            # S_22 for F = diag(lambda1, lam2)
            c22 = lam2 * lam2
            lnj = np.log(lambda1 * lam2)
            return self.mu * (1.0 - 1.0 / c22) + self.lam * lnj / c22

        return float(brentq(ortho_stress, bracket[0], bracket[1], xtol=1e-12))


def _right_cauchy(strain):
    e1, e2, e3 = np.asarray(strain, dtype=float)
    c = np.array([[1.0 + 2.0 * e1, e3], [e3, 1.0 + 2.0 * e2]])
    det = c[0, 0] * c[1, 1] - c[0, 1] * c[1, 0]
    if det <= 0.0:
        raise ValueError("inadmissible strain: det(C) <= 0")
    return c, det


def _inv2(c, det):
    return np.array([[c[1, 1], -c[0, 1]], [-c[1, 0], c[0, 0]]]) / det

"""Scalar radial basis kernels and their radial / spatial derivatives.

Four smooth families are supported, all parameterized by a smoothness
radius r0 > 0 so that a single radius sweep applies uniformly:

    multiquadric            sqrt(r^2 + r0^2)
    gaussian                exp(-r^2 / r0^2)
    inverse_quadratic       1 / (1 + r^2 / r0^2)
    inverse_multiquadric    1 / sqrt(1 + r^2 / r0^2)

Every family is twice continuously differentiable with d1(0) = 0, which
is what makes the spatial Hessian well defined at the center.  The
helper ``d1_over_r`` is the scalar field whose product with the radial
vector equals the spatial gradient; near r = 0 it switches to the
analytic limit d2(0).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FAMILIES = ("multiquadric", "gaussian", "inverse_quadratic", "inverse_multiquadric")

# Integer codes shared with the accelerated backends.
FAMILY_CODES = {name: i for i, name in enumerate(FAMILIES)}


@dataclass(frozen=True)
class Kernel:
    """A scalar RBF: family name plus smoothness radius r0 (strain units)."""

    family: str
    radius: float

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(
                f"unknown kernel family {self.family!r}; expected one of {FAMILIES}"
            )
        if not (self.radius > 0.0 and np.isfinite(self.radius)):
            raise ValueError(f"kernel radius must be a positive finite real, got {self.radius}")

    @property
    def code(self) -> int:
        return FAMILY_CODES[self.family]

    def value(self, r):
        """phi(r) for scalar or array r >= 0."""
        return _value(self.code, self.radius, np.asarray(r, dtype=float))

    def d1(self, r):
        """First radial derivative phi'(r); exactly 0 at r = 0."""
        return _d1(self.code, self.radius, np.asarray(r, dtype=float))

    def d2(self, r):
        """Second radial derivative phi''(r)."""
        return _d2(self.code, self.radius, np.asarray(r, dtype=float))

    def d1_over_r(self, r):
        """phi'(r)/r with the analytic r -> 0 limit (equals d2(0) there).

        This is the scalar kernel that turns radial vectors into the
        spatial gradient: grad phi(|x - c|) = d1_over_r(r) * (x - c).
        """
        r = np.asarray(r, dtype=float)
        small = r < 1e-10 * self.radius
        safe = np.where(small, 1.0, r)
        out = np.where(small, _d2(self.code, self.radius, np.zeros_like(r)),
                       _d1(self.code, self.radius, safe) / safe)
        return out if out.ndim else float(out)

    def grad(self, delta):
        """Spatial gradient of phi(|delta|) with respect to the point, shape (3,)."""
        delta = np.asarray(delta, dtype=float)
        r = float(np.linalg.norm(delta))
        return self.d1_over_r(r) * delta

    def hess(self, delta):
        """Spatial Hessian of phi(|delta|): d2 * u u^T + (d1/r) * (I - u u^T)."""
        delta = np.asarray(delta, dtype=float)
        r = float(np.linalg.norm(delta))
        n = delta.shape[0]
        if r < 1e-10 * self.radius:
            return float(self.d2(0.0)) * np.eye(n)
        u = delta / r
        uu = np.outer(u, u)
        return float(self.d2(r)) * uu + float(self.d1_over_r(r)) * (np.eye(n) - uu)


@dataclass(frozen=True)
class RadialVector:
    """Offset of an evaluation point from an RBF center.

    ``unit`` is None exactly at the center, where the direction is
    undefined; all kernel formulas have finite limits there.
    """

    delta: np.ndarray
    r: float
    unit: np.ndarray | None

    @classmethod
    def from_points(cls, x, center) -> "RadialVector":
        delta = np.asarray(x, dtype=float) - np.asarray(center, dtype=float)
        r = float(np.linalg.norm(delta))
        unit = delta / r if r > 0.0 else None
        return cls(delta=delta, r=r, unit=unit)


def spatial_grad(kernel: Kernel, rv: RadialVector) -> np.ndarray:
    return kernel.grad(rv.delta)


def spatial_hess(kernel: Kernel, rv: RadialVector) -> np.ndarray:
    return kernel.hess(rv.delta)


def _value(code, r0, r):
    if code == 0:
        return np.sqrt(r * r + r0 * r0)
    q = 1.0 + (r / r0) ** 2
    if code == 1:
        return np.exp(-((r / r0) ** 2))
    if code == 2:
        return 1.0 / q
    return 1.0 / np.sqrt(q)


def _d1(code, r0, r):
    if code == 0:
        return r / np.sqrt(r * r + r0 * r0)
    q = 1.0 + (r / r0) ** 2
    if code == 1:
        return -2.0 * r / (r0 * r0) * np.exp(-((r / r0) ** 2))
    if code == 2:
        return -2.0 * r / (r0 * r0) / (q * q)
    return -r / (r0 * r0) * q ** (-1.5)


def _d2(code, r0, r):
    if code == 0:
        return r0 * r0 * (r * r + r0 * r0) ** (-1.5)
    q = 1.0 + (r / r0) ** 2
    if code == 1:
        return (4.0 * r * r / r0 ** 4 - 2.0 / r0 ** 2) * np.exp(-((r / r0) ** 2))
    if code == 2:
        return 8.0 * r * r / r0 ** 4 / (q ** 3) - 2.0 / (r0 * r0) / (q * q)
    return 3.0 * r * r / r0 ** 4 * q ** (-2.5) - 1.0 / (r0 * r0) * q ** (-1.5)

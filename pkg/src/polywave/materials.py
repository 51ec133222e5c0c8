"""Physical coefficients for the elastic, poro-elastic and acoustic models.

All coefficients are piecewise constant per element; the driver expands
material records into per-element arrays keyed by subdomain label or by
spatial region.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class MaterialError(ValueError):
    pass


@dataclass(frozen=True)
class ElasticMaterial:
    rho: float          # mass density [kg/m^3]
    lam: float          # first Lame coefficient [Pa]
    mu: float           # shear modulus [Pa]
    zeta: float = 0.0   # mass-proportional damping rate [1/s]

    def __post_init__(self):
        if self.rho <= 0 or self.mu <= 0:
            raise MaterialError("rho and mu must be positive")
        if self.lam + self.mu <= 0:  # lam + 2 mu / d with d = 2
            raise MaterialError("lam + 2 mu / d must be positive")
        if self.zeta < 0:
            raise MaterialError("damping rate must be nonnegative")


@dataclass(frozen=True)
class PoroMaterial:
    rho_f: float        # saturating fluid density
    rho_s: float        # solid grain density
    phi: float          # porosity, in (0, 1)
    a: float            # tortuosity (>= 1; the a > 1 theory case is checked softly)
    eta: float          # dynamic fluid viscosity
    k: float            # absolute permeability
    m: float            # Biot modulus
    beta: float         # Biot coefficient, in (0, 1]
    lam: float
    mu: float

    def __post_init__(self):
        if not 0.0 < self.phi < 1.0:
            raise MaterialError("porosity must lie strictly in (0, 1)")
        if self.a < 1.0:
            raise MaterialError("tortuosity must be >= 1")
        if min(self.rho_f, self.rho_s, self.k, self.m, self.mu) <= 0:
            raise MaterialError("rho_f, rho_s, k, m, mu must be positive")
        if self.eta < 0:
            raise MaterialError("viscosity must be nonnegative")
        if not 0.0 < self.beta <= 1.0:
            raise MaterialError("Biot coefficient must lie in (0, 1]")

    @property
    def rho(self):
        return self.phi * self.rho_f + (1.0 - self.phi) * self.rho_s

    @property
    def rho_w(self):
        return self.a * self.rho_f / self.phi

    @property
    def rho_u(self):
        return 0.5 * self.rho_s * (1.0 - self.phi)


@dataclass(frozen=True)
class AcousticMaterial:
    rho_a: float        # density
    c: float            # wave speed

    def __post_init__(self):
        if self.rho_a <= 0 or self.c <= 0:
            raise MaterialError("rho_a and c must be positive")


@dataclass(frozen=True)
class InterfaceLaw:
    """Hydraulic permeability of the poro-acoustic interface."""

    tau: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.tau <= 1.0:
            raise MaterialError("tau must lie in [0, 1]")

    @property
    def zeta_tau(self):
        if self.tau == 0.0:
            raise MaterialError("sealed faces (tau = 0) have no Robin weight")
        return (1.0 - self.tau) / self.tau


def zeta_tau(tau):
    tau = np.asarray(tau, dtype=float)
    if np.any(tau <= 0.0) or np.any(tau > 1.0):
        raise MaterialError("Robin weight needs tau in (0, 1]")
    return (1.0 - tau) / tau


def stiffness_norm(mat, d=2):
    """Largest eigenvalue of the isotropic stiffness tensor on symmetric tensors.

    Computed from the Voigt matrix with the shear rows scaled by sqrt(2) so
    the representation is orthonormal under the Frobenius product; equals
    d*lam + 2*mu for lam >= 0.
    """
    lam, mu = mat.lam, mat.mu
    n = 3 if d == 2 else 6
    V = np.zeros((n, n))
    V[:d, :d] = lam
    V[np.diag_indices(d)] = lam + 2.0 * mu
    for k in range(d, n):
        V[k, k] = 2.0 * mu
    return float(np.linalg.eigvalsh(V).max())


def derived_poro_densities(mat):
    """(bulk rho, rho_w, rho_u); porosity 0 or 1 is rejected by the record."""
    return mat.rho, mat.rho_w, mat.rho_u


def mass_positivity_residual(mat, v, z):
    """Residual of the weighted-square decomposition of the 2x2 density form.

    (rho v + rho_f z) . v + (rho_f v + rho_w z) . z equals
    2|rho_u^(1/2) v|^2 + |(rho_f phi)^(1/2)(v + z/phi)|^2 + |(rho_f (a-1))^(1/2) z / phi^(1/2)|^2
    identically; returns the relative mismatch for given sample vectors.
    """
    v = np.asarray(v, dtype=float)
    z = np.asarray(z, dtype=float)
    lhs = np.sum((mat.rho * v + mat.rho_f * z) * v + (mat.rho_f * v + mat.rho_w * z) * z)
    rhs = (2.0 * mat.rho_u * np.sum(v * v)
           + mat.rho_f * mat.phi * np.sum((v + z / mat.phi) ** 2)
           + mat.rho_f * (mat.a - 1.0) / mat.phi * np.sum(z * z))
    scale = max(abs(lhs), abs(rhs), 1e-300)
    return abs(lhs - rhs) / scale

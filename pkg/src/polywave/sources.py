"""Time-dependent loads: wavelets, point sources, plane waves, and the
manufactured solutions used by the verification suites.

All loads are pure functions of time.  Body forces and boundary data of the
manufactured solutions factor into (time function) x (spatial field), which
keeps the per-step load evaluation to a few vector updates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

SQRT2PI = np.sqrt(2.0) * np.pi
PI = np.pi


# ---------------------------------------------------------------------------
# wavelets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Wavelet:
    kind: str = "ricker"           # ricker | samples
    a0: float = 1.0
    f_p: float = 1.0               # peak frequency [Hz]
    t0: float = 0.0
    samples: np.ndarray | None = None  # (n, 2) time/value table

    def __post_init__(self):
        if self.kind == "ricker" and self.f_p <= 0:
            raise ValueError("Ricker wavelet needs a positive peak frequency")
        if self.kind == "samples" and (self.samples is None or self.samples.ndim != 2):
            raise ValueError("sampled wavelet needs a two-column table")


def ricker(t, w):
    """a0 (1 - 2 b (t - t0)^2) exp(-b (t - t0)^2) with b = pi^2 f_p^2."""
    b = PI * PI * w.f_p * w.f_p
    s = np.asarray(t, dtype=float) - w.t0
    return w.a0 * (1.0 - 2.0 * b * s * s) * np.exp(-b * s * s)


def wavelet_fn(w):
    if w.kind == "ricker":
        return lambda t: ricker(t, w)
    table = np.asarray(w.samples, dtype=float)
    return lambda t: w.a0 * np.interp(t, table[:, 0], table[:, 1],
                                      left=0.0, right=0.0)


def load_wavelet_table(path, a0=1.0):
    return Wavelet(kind="samples", a0=a0, samples=np.loadtxt(path, ndmin=2))


# ---------------------------------------------------------------------------
# point sources
# ---------------------------------------------------------------------------

def point_force_load(space, x0, direction, time_fn):
    """Delta force at x0: dof weights are the basis values there."""
    le = space.local_index(space.mesh.locate(x0))
    vals, _ = space.basis(le, np.asarray([x0], dtype=float))
    vec = np.zeros(space.n_dofs)
    for c in range(space.components):
        vec[space.component_dofs(le, c)] = direction[c] * vals[:, 0]
    return time_fn, vec


def double_couple_load(space, x0, moment, time_fn):
    """Point moment-tensor source, paired weakly as m : grad(v)(x0)."""
    moment = np.asarray(moment, dtype=float)
    if not np.allclose(moment, moment.T):
        raise ValueError("moment tensor must be symmetric")
    le = space.local_index(space.mesh.locate(x0))
    _, grads = space.basis(le, np.asarray([x0], dtype=float))
    vec = np.zeros(space.n_dofs)
    for c in range(space.components):
        vec[space.component_dofs(le, c)] = grads[:, 0, :] @ moment[c]
    return time_fn, vec


def plane_wave_amplitude(t, z, z0, c, rho, wavelet):
    """Displacement of a vertically incident plane wave driven by f(t).

    (2 rho c)^(-1) H(t - |z - z0|/c) * integral of the wavelet up to the
    retarded time; the integral is evaluated adaptively.
    """
    if c <= 0:
        raise ValueError("wave speed must be positive")
    f = wavelet_fn(wavelet)
    delay = abs(z - z0) / c

    def one(ti):
        upper = ti - delay
        if upper <= 0.0:
            return 0.0
        val, _ = quad(f, 0.0, upper, limit=200)
        return val / (2.0 * rho * c)

    if np.isscalar(t):
        return one(t)
    return np.array([one(ti) for ti in np.asarray(t, dtype=float)])


# ---------------------------------------------------------------------------
# manufactured solutions
# ---------------------------------------------------------------------------

def _sin_t(t):
    return np.sin(SQRT2PI * t)


def _cos_t(t):
    return np.cos(SQRT2PI * t)


class ElasticSineSolution:
    """Divergence-free sine field on the unit square times sin(sqrt(2) pi t)."""

    kind = "elastic"

    def __init__(self, rho=1.0, lam=1.0, mu=1.0, zeta=1.0):
        self.rho, self.lam, self.mu, self.zeta = rho, lam, mu, zeta

    @staticmethod
    def _shape(pts):
        x, y = pts[:, 0], pts[:, 1]
        return np.column_stack([-np.sin(PI * x) ** 2 * np.sin(2 * PI * y),
                                np.sin(2 * PI * x) * np.sin(PI * y) ** 2])

    @staticmethod
    def _laplacian(pts):
        x, y = pts[:, 0], pts[:, 1]
        return np.column_stack([
            2 * PI ** 2 * (1 - 2 * np.cos(2 * PI * x)) * np.sin(2 * PI * y),
            2 * PI ** 2 * (2 * np.cos(2 * PI * y) - 1) * np.sin(2 * PI * x)])

    @staticmethod
    def _shape_grad(pts):
        x, y = pts[:, 0], pts[:, 1]
        G = np.empty((len(pts), 2, 2))
        G[:, 0, 0] = -PI * np.sin(2 * PI * x) * np.sin(2 * PI * y)
        G[:, 0, 1] = -2 * PI * np.sin(PI * x) ** 2 * np.cos(2 * PI * y)
        G[:, 1, 0] = 2 * PI * np.cos(2 * PI * x) * np.sin(PI * y) ** 2
        G[:, 1, 1] = PI * np.sin(2 * PI * x) * np.sin(2 * PI * y)
        return G

    def u(self, t, pts):
        return _sin_t(t) * self._shape(pts)

    def ut(self, t, pts):
        return SQRT2PI * _cos_t(t) * self._shape(pts)

    def grad_u(self, t, pts):
        return _sin_t(t) * self._shape_grad(pts)

    def u_terms(self):
        return [(_sin_t, self._shape)]

    def force_u_terms(self):
        rho, mu, zeta = self.rho, self.mu, self.zeta
        # div u = 0, so only the shear part of the operator survives
        sin_part = lambda pts: (rho * (zeta ** 2 - 2 * PI ** 2) * self._shape(pts)
                                - mu * self._laplacian(pts))
        cos_part = lambda pts: 2.0 * rho * zeta * SQRT2PI * self._shape(pts)
        return [(_sin_t, sin_part), (_cos_t, cos_part)]

    def force_u(self, t, pts):
        return sum(fn(t) * spatial(pts) for fn, spatial in self.force_u_terms())


def _poly_shape(pts):
    x = pts[:, 0]
    v = x * x * np.cos(PI * x / 2) * np.sin(PI * x)
    return np.column_stack([v, v])


def _poly_v2(x):
    """Second derivative of x^2 cos(pi x / 2) sin(pi x)."""
    c2, s2 = np.cos(PI * x / 2), np.sin(PI * x / 2)
    c, s = np.cos(PI * x), np.sin(PI * x)
    return (-PI ** 2 * x ** 2 * s2 * c - 1.25 * PI ** 2 * x ** 2 * s * c2
            - 2 * PI * x * s2 * s + 4 * PI * x * c2 * c + 2 * s * c2)


def _poly_v1(x):
    c2, s2 = np.cos(PI * x / 2), np.sin(PI * x / 2)
    c, s = np.cos(PI * x), np.sin(PI * x)
    return -PI * x ** 2 * s2 * s / 2 + PI * x ** 2 * c2 * c + 2 * x * s * c2


class PoroPolynomialSolution:
    """Polynomial-times-cosine Biot solution with w = -u and zero pore pressure
    when beta = 1."""

    kind = "poro"

    def __init__(self, rho_f=1.0, rho_s=1.0, phi=0.5, a=1.0, eta=1.0, k=1.0,
                 m=1.0, beta=1.0, lam=1.0, mu=1.0):
        self.rho_f, self.rho_s, self.porosity, self.a = rho_f, rho_s, phi, a
        self.eta, self.k, self.m, self.beta = eta, k, m, beta
        self.lam, self.mu = lam, mu
        self.rho = phi * rho_f + (1 - phi) * rho_s
        self.rho_w = a * rho_f / phi

    def u(self, t, pts):
        return _cos_t(t) * _poly_shape(pts)

    def ut(self, t, pts):
        return -SQRT2PI * _sin_t(t) * _poly_shape(pts)

    def grad_u(self, t, pts):
        G = np.zeros((len(pts), 2, 2))
        v1 = _poly_v1(pts[:, 0])
        G[:, 0, 0] = v1
        G[:, 1, 0] = v1
        return _cos_t(t) * G

    def w(self, t, pts):
        return -self.u(t, pts)

    def wt(self, t, pts):
        return -self.ut(t, pts)

    def grad_w(self, t, pts):
        return -self.grad_u(t, pts)

    def mixt(self, t, pts):
        """d/dt (u + w / porosity), the kinetic cross combination."""
        return self.ut(t, pts) + self.wt(t, pts) / self.porosity

    def comb(self, t, pts):
        return self.beta * self.u(t, pts) + self.w(t, pts)

    def comb_grad(self, t, pts):
        return self.beta * self.grad_u(t, pts) + self.grad_w(t, pts)

    def u_terms(self):
        return [(_cos_t, _poly_shape)]

    def w_terms(self):
        return [(_cos_t, lambda pts: -_poly_shape(pts))]

    def force_u_terms(self):
        rho, rho_f = self.rho, self.rho_f
        lam, mu, m, beta = self.lam, self.mu, self.m, self.beta

        def cos_part(pts):
            x = pts[:, 0]
            v2 = _poly_v2(x)
            out = -2 * PI ** 2 * (rho - rho_f) * _poly_shape(pts)
            out[:, 0] += (-(lam + 2 * mu) + m * beta * (1 - beta)) * v2
            out[:, 1] += -mu * v2
            return out

        return [(_cos_t, cos_part)]

    def force_w_terms(self):
        rho_f, rho_w, m, beta = self.rho_f, self.rho_w, self.m, self.beta
        eta_k = self.eta / self.k

        def cos_part(pts):
            x = pts[:, 0]
            out = -2 * PI ** 2 * (rho_f - rho_w) * _poly_shape(pts)
            out[:, 0] += m * (1 - beta) * _poly_v2(x)
            return out

        def sin_part(pts):
            return SQRT2PI * eta_k * _poly_shape(pts)

        return [(_cos_t, cos_part), (_sin_t, sin_part)]

    def force_u(self, t, pts):
        return sum(fn(t) * spatial(pts) for fn, spatial in self.force_u_terms())

    def force_w(self, t, pts):
        return sum(fn(t) * spatial(pts) for fn, spatial in self.force_w_terms())


def _acoustic_shape(pts):
    x, y = pts[:, 0], pts[:, 1]
    return x * x * np.sin(PI * x) * np.sin(PI * y)


def _acoustic_laplacian(pts):
    x, y = pts[:, 0], pts[:, 1]
    return (-2 * PI ** 2 * x ** 2 * np.sin(PI * x)
            + 4 * PI * x * np.cos(PI * x) + 2 * np.sin(PI * x)) * np.sin(PI * y)


class CoupledPolynomialSolution(PoroPolynomialSolution):
    """Poro solution in the left half plus an acoustic potential in the right;
    all interface transmission terms vanish identically at x = 0."""

    kind = "coupled"

    def __init__(self, rho_a=1.0, c=1.0, **poro_kwargs):
        super().__init__(**poro_kwargs)
        self.rho_a, self.c = rho_a, c

    def phi(self, t, pts):
        return _sin_t(t) * _acoustic_shape(pts)

    def phit(self, t, pts):
        return SQRT2PI * _cos_t(t) * _acoustic_shape(pts)

    def grad_phi(self, t, pts):
        x, y = pts[:, 0], pts[:, 1]
        G = np.empty((len(pts), 2))
        G[:, 0] = (PI * x * x * np.cos(PI * x) + 2 * x * np.sin(PI * x)) * np.sin(PI * y)
        G[:, 1] = PI * x * x * np.sin(PI * x) * np.cos(PI * y)
        return _sin_t(t) * G

    def phi_terms(self):
        return [(_sin_t, _acoustic_shape)]

    def force_phi_terms(self):
        rho_a, c = self.rho_a, self.c
        spatial = lambda pts: rho_a * (-2 * PI ** 2 / (c * c) * _acoustic_shape(pts)
                                       - _acoustic_laplacian(pts))
        return [(_sin_t, spatial)]

    def force_phi(self, t, pts):
        return sum(fn(t) * spatial(pts) for fn, spatial in self.force_phi_terms())


def manufactured_solution(name, **kwargs):
    table = {"elastic-sine": ElasticSineSolution,
             "poro-poly": PoroPolynomialSolution,
             "coupled-poly": CoupledPolynomialSolution}
    if name not in table:
        raise ValueError(f"unknown manufactured solution {name!r}")
    return table[name](**kwargs)

"""Time marching for M x'' + D x' + A x = s(t).

Newmark in acceleration form with one cached effective solve per run, and
the explicit leap-frog limit (beta = 0, gamma = 1/2).  Leap-frog accepts
mass-proportional damping through a centered-velocity update and refuses
any other velocity coupling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import BlockDiagSolver, EffectiveSolver, SolveConfig


class TimeIntegrationError(Exception):
    pass


@dataclass(frozen=True)
class NewmarkParams:
    dt: float
    beta: float = 0.25
    gamma: float = 0.5

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if not (0.0 <= self.beta <= 0.5 and 0.0 <= self.gamma <= 1.0):
            raise ValueError("Newmark parameters outside their admissible range")


@dataclass(frozen=True)
class LeapfrogParams:
    dt: float

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")


@dataclass
class State:
    t: float
    x: np.ndarray
    z: np.ndarray   # velocity
    l: np.ndarray   # acceleration


def mass_solver(system):
    blocks = system.mass_blocks or [np.arange(system.n)]
    return BlockDiagSolver(system.m, blocks, name="mass matrix")


def initial_acceleration(system, x0, z0, msolve=None):
    """l0 from M l0 = s(0) - D z0 - A x0."""
    msolve = msolve or mass_solver(system)
    rhs = system.load(0.0) - system.d @ z0 - system.a @ x0
    return msolve(rhs)


class Stepper:
    """Caches solvers; advances one state by dt per call."""

    def __init__(self, system, params, solve_cfg=None):
        self.system = system
        self.params = params
        cfg = solve_cfg or SolveConfig()
        self.msolve = mass_solver(system)
        if isinstance(params, LeapfrogParams):
            if system.damping_rate is None and system.d.nnz > 0:
                raise TimeIntegrationError(
                    "leap-frog needs zero or mass-proportional damping; use Newmark")
            self.effective = None
        else:
            self.effective = EffectiveSolver(
                system.m, system.d, system.a,
                params.gamma * params.dt, params.beta * params.dt ** 2,
                self.msolve, rel_tol=min(cfg.rel_tol, 1e-11),
                direct_limit=cfg.direct_limit)

    def step(self, state):
        if self.effective is None:
            return self._leapfrog(state)
        return self._newmark(state)

    def _newmark(self, state):
        dt, beta, gamma = self.params.dt, self.params.beta, self.params.gamma
        sys_ = self.system
        x_star = state.x + dt * state.z + dt * dt * (0.5 - beta) * state.l
        z_star = state.z + dt * (1.0 - gamma) * state.l
        t1 = state.t + dt
        rhs = sys_.load(t1) - sys_.d @ z_star - sys_.a @ x_star
        l1 = self.effective.solve(rhs, x0=state.l)
        return State(t1, x_star + beta * dt * dt * l1, z_star + gamma * dt * l1, l1)

    def _leapfrog(self, state):
        dt = self.params.dt
        sys_ = self.system
        t1 = state.t + dt
        x1 = state.x + dt * state.z + 0.5 * dt * dt * state.l
        q = self.msolve(sys_.load(t1) - sys_.a @ x1)
        rate = sys_.damping_rate
        if rate is None or not rate.any():
            z1 = state.z + 0.5 * dt * (state.l + q)
            l1 = q
        else:
            z1 = (state.z + 0.5 * dt * (state.l + q)) / (1.0 + 0.5 * dt * rate)
            l1 = q - rate * z1
        return State(t1, x1, z1, l1)


def newmark_step(system, state, params, solve_cfg=None):
    return Stepper(system, params, solve_cfg).step(state)


def leapfrog_step(system, state, dt, solve_cfg=None):
    return Stepper(system, LeapfrogParams(dt), solve_cfg).step(state)


def integrate(system, x0, z0, T, params, observers=(), solve_cfg=None):
    """March to time T = n dt; observers are called as obs(step, state)."""
    dt = params.dt
    n_steps = int(round(T / dt))
    if abs(n_steps * dt - T) > 1e-9 * max(T, dt):
        raise TimeIntegrationError(f"final time {T} is not a multiple of dt {dt}")
    stepper = Stepper(system, params, solve_cfg)
    state = State(0.0, np.asarray(x0, dtype=float).copy(),
                  np.asarray(z0, dtype=float).copy(),
                  initial_acceleration(system, x0, z0, stepper.msolve))
    for obs in observers:
        obs(0, state)
    for k in range(1, n_steps + 1):
        state = stepper.step(state)
        if not np.isfinite(state.x).all():
            raise TimeIntegrationError(f"non-finite solution at step {k} (t = {state.t})")
        for obs in observers:
            obs(k, state)
    return state

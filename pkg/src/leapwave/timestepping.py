"""Explicit leapfrog time stepping for semidiscrete wave equations.

Central second differences in time around the assembled mass and stiffness
operators, plus the machinery that goes with the scheme: CFL verification,
empirical stability thresholds, discrete energies, damped stability bounds
and divided-difference sequences of the trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh, get_lapack_funcs

__all__ = [
    "TimeGrid",
    "StateSequence",
    "DiscreteEnergyTrace",
    "CflCheck",
    "StabilityCheck",
    "DifferenceSequences",
    "run_leapfrog",
    "mht_form",
    "verify_cfl",
    "find_cfl_alpha",
    "discrete_energy_trace",
    "check_damped_stability",
    "difference_sequences",
    "stability_constant",
    "acceleration_stability_constant",
    "third_difference_stability_constant",
]


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid t_n = n * tau covering [0, n_steps * tau]."""

    tau: float
    n_steps: int

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("time step must be positive")
        if self.n_steps < 1:
            raise ValueError("grid needs at least one step")

    @property
    def t_star(self):
        return self.tau * self.n_steps

    @property
    def times(self):
        return self.tau * np.arange(self.n_steps + 1)


class StateSequence:
    """Trajectory U^0 ... U^N of coefficient vectors produced by the scheme.

    Negative indices return the zero vector: the discrete solution is extended
    by zero backwards in time, matching the scheme's rest initial data.
    """

    def __init__(self, space, grid, states):
        self.space = space
        self.grid = grid
        self.states = np.asarray(states, dtype=float)

    @property
    def n_states(self):
        return self.states.shape[0]

    def __len__(self):
        return self.n_states

    def __getitem__(self, n):
        if n < 0:
            return np.zeros(self.states.shape[1])
        if n >= self.n_states:
            raise IndexError("state index out of range")
        return self.states[n]

    def padded(self, before=2):
        """State array with zero rows prepended, for stencils that reach below n=0."""
        pad = np.zeros((before, self.states.shape[1]))
        return np.vstack([pad, self.states])


@dataclass
class DiscreteEnergyTrace:
    """Half-step energies E^{n+1/2} of a trajectory, n = 0 ... N-1."""

    values: np.ndarray
    grid: TimeGrid

    @property
    def half_times(self):
        return self.grid.tau * (np.arange(self.values.size) + 0.5)


@dataclass(frozen=True)
class CflCheck:
    """Largest generalized stiffness eigenvalue and the stability margin of the step."""

    mu0: float
    lam_max: float
    tau: float


@dataclass(frozen=True)
class StabilityCheck:
    """Damped stability budget: weighted energy sum against the weighted load sum."""

    lhs: float
    rhs: float
    theta: float
    c_x: float
    mu0: float
    satisfied: bool


@dataclass(frozen=True)
class DifferenceSequences:
    """Second and third divided differences of a trajectory, zero-extended at n < 0.

    a[n] is the discrete acceleration (U^{n+1} - 2 U^n + U^{n-1}) / tau^2 and
    b[n] the third difference (U^{n+1} - 3 U^n + 3 U^{n-1} - U^{n-2}) / tau^3,
    both defined for n = 0 ... n_states - 2.  Half-step means and velocities of
    the acceleration satisfy b[n+1] = a_dot_half[n].
    """

    a: np.ndarray
    b: np.ndarray
    a_half: np.ndarray
    a_dot_half: np.ndarray


def run_leapfrog(space, grid, loads, initial=None, on_state=None, keep_states=True):
    """March the leapfrog scheme: M (U^{n+1} - 2U^n + U^{n-1}) / tau^2 + K U^n = F^n.

    loads holds the mass-weighted source vectors row by row, or a pair
    (amplitudes, shape) for separable sources F^n = amplitudes[n] * shape;
    rows 1 ... n_steps-1 drive the update and row 0 is never read.  By default
    the scheme starts from rest, U^0 = U^1 = 0; a pair of start vectors can be
    supplied instead.  on_state(n, U^n) is invoked for every state including
    the two start vectors; keep_states=False drops the trajectory and returns
    None, keeping long marches in constant memory.
    Raises FloatingPointError when a state stops being finite.
    """
    n_steps = grid.n_steps
    if isinstance(loads, tuple):
        amps, shape = loads
        amps = np.asarray(amps, dtype=float)
        shape = np.asarray(shape, dtype=float)
        if amps.ndim != 1 or amps.shape[0] < n_steps or shape.shape != (space.dofs,):
            raise ValueError("separable loads need n_steps amplitudes and a dof shape")

        def load_at(n):
            return amps[n] * shape

    else:
        loads = np.asarray(loads, dtype=float)
        if loads.shape[0] < n_steps or loads.shape[1] != space.dofs:
            raise ValueError("loads must cover steps 0 ... n_steps-1 for all dofs")

        def load_at(n):
            return loads[n]

    tau2 = grid.tau**2
    mass, stiffness = space.mass, space.stiffness
    cb = mass.cholesky
    kmat = stiffness.csr
    states = np.zeros((n_steps + 1, space.dofs)) if keep_states else None
    prev = np.zeros(space.dofs)
    cur = np.zeros(space.dofs)
    if initial is not None:
        prev, cur = (np.asarray(v, dtype=float).copy() for v in initial)
        if keep_states:
            states[0], states[1] = prev, cur
    pbtrs, = get_lapack_funcs(("pbtrs",), (cb, prev))
    if on_state is not None:
        on_state(0, prev)
        on_state(1, cur)
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(1, n_steps):
            accel, info = pbtrs(cb, load_at(n) - kmat @ cur, lower=True)
            nxt = 2.0 * cur - prev + tau2 * accel
            if not np.isfinite(nxt @ nxt):
                raise FloatingPointError(f"blow-up detected at step {n + 1}")
            if keep_states:
                states[n + 1] = nxt
            if on_state is not None:
                on_state(n + 1, nxt)
            prev, cur = cur, nxt
    return StateSequence(space, grid, states) if keep_states else None


def mht_form(space, grid, v, w):
    """Step-size-modified inner product (v, w) - tau^2 (grad v, grad w).

    The conserved discrete energy of the scheme uses this form at half the
    step size, i.e. with tau^2 replaced by tau^2 / 4.
    """
    return float(v @ space.mass.matvec(w) - grid.tau**2 * (v @ space.stiffness.matvec(w)))


def _lam_max(space):
    """Largest eigenvalue of M^{-1} K, cached on the space."""
    cached = getattr(space, "_lam_max_cache", None)
    if cached is not None:
        return cached
    if space.dofs <= 2049:
        kd = space.stiffness.to_dense()
        md = space.mass.to_dense()
        lam = float(eigh(kd, md, eigvals_only=True, subset_by_index=[space.dofs - 1] * 2)[0])
    else:
        # power iteration on M^{-1} K with the cached banded factorization
        rng = np.random.default_rng(12345)
        v = rng.standard_normal(space.dofs)
        v /= np.linalg.norm(v)
        lam = 0.0
        for _ in range(10000):
            w = space.mass.solve(space.stiffness.matvec(v))
            new = float(np.linalg.norm(w))
            w /= new
            if abs(new - lam) <= 1e-8 * new:
                lam = new
                break
            lam, v = new, w
    space._lam_max_cache = lam
    return lam


def verify_cfl(space, grid):
    """Stability margin mu0 = 1 - tau^2 lam_max / 4 of the leapfrog step.

    lam_max is the largest generalized eigenvalue of the stiffness against the
    mass; the scheme is stable up to tau = 2 / sqrt(lam_max).  Raises when the
    margin is not positive.
    """
    lam = _lam_max(space)
    mu0 = 1.0 - grid.tau**2 * lam / 4.0
    if mu0 <= 0:
        raise ValueError(f"CFL violated: mu0 = {mu0:.3e}")
    return CflCheck(mu0=mu0, lam_max=lam, tau=grid.tau)


def find_cfl_alpha(space, probe_horizon=20000, resolution=1e-3, growth_cap=1e6, seed=0):
    """Empirical stability threshold alpha for tau = alpha * h, found by bisection.

    A run with a fixed broadband load counts as stable when it stays finite for
    probe_horizon steps and its peak discrete energy stays below growth_cap
    times the peak over the first ten steps.
    """
    h = space.mesh.h
    rng = np.random.default_rng(seed)
    load = rng.standard_normal(space.dofs)
    loads = np.broadcast_to(load, (probe_horizon, space.dofs))

    def stable(r):
        grid = TimeGrid(r * h, probe_horizon)
        try:
            seq = run_leapfrog(space, grid, loads)
        except FloatingPointError:
            return False
        trace = discrete_energy_trace(seq, grid).values
        ref = trace[:10].max()
        return bool(np.isfinite(trace).all() and trace.max() <= growth_cap * ref)

    lo, hi = 0.05, 1.0
    if not stable(lo):
        raise RuntimeError("probe unstable even at r = 0.05")
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if stable(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def discrete_energy_trace(seq, grid):
    """Conserved half-step energies of a trajectory.

    E^{n+1/2} pairs the half-step velocity, measured in the tau/2-modified
    inner product, with the gradient of the midpoint state; an undriven run
    keeps it constant and a driven run obeys the load-power identity.
    """
    u = seq.states
    tau = grid.tau
    vel = (u[1:] - u[:-1]) / tau
    mid = 0.5 * (u[1:] + u[:-1])
    mass, stiffness = seq.space.mass, seq.space.stiffness
    mv = mass.matmat(vel.T)
    kv = stiffness.matmat(vel.T)
    km = stiffness.matmat(mid.T)
    e = (
        np.einsum("nd,dn->n", vel, mv)
        - 0.25 * tau**2 * np.einsum("nd,dn->n", vel, kv)
        + np.einsum("nd,dn->n", mid, km)
    )
    return DiscreteEnergyTrace(values=e, grid=grid)


def stability_constant(theta):
    """Constant C_X(theta) of the damped stability bound; 13/12 in the limit theta -> 0."""
    theta = float(theta)
    if not 0 <= theta <= 1:
        raise ValueError("theta = rho * tau must lie in [0, 1]")
    if theta < 1e-12:
        return 13.0 / 12.0
    return (169.0 / 12.0) * theta / ((13.0 - 6.0 * theta) * (-np.expm1(-theta)))


def acceleration_stability_constant(theta):
    """Constant multiplying the damped source curvature in the acceleration bound."""
    return (2.0 / 3.0) * stability_constant(theta) * (1.0 + np.exp(2.0 * theta))


def third_difference_stability_constant(theta):
    """Constant multiplying the damped third source derivative in the jerk bound."""
    return (11.0 / 20.0) * stability_constant(theta) * (2.0 + np.exp(2.0 * theta))


def check_damped_stability(seq, grid, rho, load_norms_sq):
    """Exponentially damped energy sum against its a priori load bound.

    lhs sums tau * E^{n+1/2} * exp(-2 rho t_n) over the trajectory, rhs is
    C_X(theta) / (mu0 rho^2) times the matching damped sum of squared load
    norms; load_norms_sq[n] must hold |G^n|_Omega^2.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    theta = rho * grid.tau
    if theta > 1:
        raise ValueError("damped stability requires rho * tau <= 1")
    cfl = verify_cfl(seq.space, grid)
    trace = discrete_energy_trace(seq, grid).values
    n = trace.size
    tn = grid.tau * np.arange(n)
    weights = np.exp(-2.0 * rho * tn)
    lhs = float(grid.tau * np.sum(trace * weights))
    norms = np.asarray(load_norms_sq, dtype=float)[:n]
    wn = weights[: norms.size]
    c_x = stability_constant(theta)
    rhs = float(c_x / (cfl.mu0 * rho**2) * grid.tau * np.sum(norms * wn))
    return StabilityCheck(
        lhs=lhs,
        rhs=rhs,
        theta=theta,
        c_x=c_x,
        mu0=cfl.mu0,
        satisfied=bool(lhs <= rhs * (1.0 + 1e-9)),
    )


def difference_sequences(seq, grid):
    """Second and third divided differences of the trajectory with zero extension."""
    tau = grid.tau
    w = seq.padded(before=2)  # w[m] = U^{m-2}
    a = (w[3:] - 2.0 * w[2:-1] + w[1:-2]) / tau**2
    b = (w[3:] - 3.0 * w[2:-1] + 3.0 * w[1:-2] - w[:-3]) / tau**3
    a_half = 0.5 * (a[1:] + a[:-1])
    a_dot_half = (a[1:] - a[:-1]) / tau
    return DifferenceSequences(a=a, b=b, a_half=a_half, a_dot_half=a_dot_half)

"""Piecewise-polynomial time reconstructions of leapfrog trajectories.

Two reconstructions of a state sequence V^0, V^1, ... are provided: a
piecewise-quadratic, globally continuous one whose second derivative is the
piecewise-constant acceleration stencil, and a piecewise-quartic, twice
continuously differentiable one whose second derivative is the quadratic
reconstruction of the discrete acceleration.  Sequences are extended by zero
for negative indices throughout.

Reconstructions built from a state sequence keep only a reference to the
states plus the five-point stencil and materialize per-interval coefficients
on demand, so long trajectories never allocate the full coefficient tensor.
"""

from __future__ import annotations

import numpy as np

from leapwave.timestepping import StateSequence

__all__ = [
    "TimeReconstruction",
    "SourceReconstruction",
    "reconstruct_R",
    "reconstruct_L",
    "delta",
    "r_time_stencil",
    "l_time_stencil",
    "verify_commuting",
    "verify_reconstructed_equation",
    "continuity_jumps",
]

_FACTORIALS = np.array([1.0, 1.0, 2.0, 6.0, 24.0])


def r_time_stencil(tau):
    """Weights of the quadratic reconstruction coefficients over shifts -2 ... 2.

    Row j gives the j-th right-derivative at the interval start as a
    combination of V^{n-2} ... V^{n+2} (only shifts -1, 0, 1 are active).
    """
    return np.array(
        [
            [0.0, 0.0, 1.0, 0.0, 0.0],
            [0.0, -0.5 / tau, 0.0, 0.5 / tau, 0.0],
            [0.0, 1.0 / tau**2, -2.0 / tau**2, 1.0 / tau**2, 0.0],
        ]
    )


def l_time_stencil(tau):
    """Weights of the quartic reconstruction coefficients over shifts -2 ... 2."""
    return np.array(
        [
            [-1.0 / 24, 5.0 / 24, 17.0 / 24, 3.0 / 24, 0.0],
            [1.0 / (12 * tau), -9.0 / (12 * tau), 3.0 / (12 * tau), 5.0 / (12 * tau), 0.0],
            [0.0, 1.0 / tau**2, -2.0 / tau**2, 1.0 / tau**2, 0.0],
            [-0.5 / tau**3, 1.0 / tau**3, 0.0, -1.0 / tau**3, 0.5 / tau**3],
            [1.0 / tau**4, -4.0 / tau**4, 6.0 / tau**4, -4.0 / tau**4, 1.0 / tau**4],
        ]
    )


def _states_array(seq):
    if isinstance(seq, StateSequence):
        return seq.states
    arr = np.asarray(seq, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    return arr


class TimeReconstruction:
    """Piecewise polynomial on a uniform time grid with vector coefficients.

    On the interval [t_n, t_{n+1}) the value is the Taylor-style sum
    sum_j c[n, j] (t - t_n)^j / j!, so c[n, j] is the j-th time derivative at
    t_n from the right.  Coefficients either live in a dense tensor of shape
    (n_intervals, order + 1, dim) or are generated from a stored state array
    through a shift stencil.
    """

    def __init__(self, grid, coeffs=None, *, states=None, stencil=None, n_intervals=None):
        self.grid = grid
        if coeffs is not None:
            self._coeffs = np.asarray(coeffs, dtype=float)
            if self._coeffs.ndim != 3:
                raise ValueError("coeffs must have shape (n_intervals, order + 1, dim)")
            self._states = self._stencil = None
            self._n_intervals = self._coeffs.shape[0]
            self._ncoef = self._coeffs.shape[1]
            self._dim = self._coeffs.shape[2]
        else:
            self._coeffs = None
            self._states = np.asarray(states, dtype=float)
            self._stencil = np.asarray(stencil, dtype=float)
            self._n_intervals = int(n_intervals)
            self._ncoef = self._stencil.shape[0]
            self._dim = self._states.shape[1]

    @property
    def n_intervals(self):
        return self._n_intervals

    @property
    def order(self):
        return self._ncoef - 1

    @property
    def dim(self):
        return self._dim

    @property
    def t_end(self):
        return self.grid.tau * self._n_intervals

    @property
    def coeffs(self):
        """Dense coefficient tensor; materializes stencil-backed instances."""
        if self._coeffs is None:
            return self.coeff_block(0, self._n_intervals)
        return self._coeffs

    def coeff_block(self, n0, n1):
        """Coefficients of intervals n0 ... n1-1 as an (n1-n0, order+1, dim) block."""
        if self._coeffs is not None:
            return self._coeffs[n0:n1]
        size = n1 - n0
        out = np.zeros((size, self._ncoef, self._dim))
        for d in range(5):
            col = self._stencil[:, d]
            if not np.any(col):
                continue
            j0 = n0 + d - 2
            start = max(j0, 0)
            if start >= j0 + size:
                continue
            rows = self._states[start : j0 + size]
            out[start - j0 :] += col[None, :, None] * rows[:, None, :]
        return out

    def _coeffs_at(self, idx):
        if self._coeffs is not None:
            return self._coeffs[idx]
        idx = np.asarray(idx)
        out = np.zeros((idx.size, self._ncoef, self._dim))
        for d in range(5):
            col = self._stencil[:, d]
            if not np.any(col):
                continue
            j = idx + d - 2
            valid = j >= 0
            rows = np.zeros((idx.size, self._dim))
            rows[valid] = self._states[j[valid]]
            out += col[None, :, None] * rows[:, None, :]
        return out

    def derivative(self, order=1):
        if order == 0:
            return self
        if order > self.order:
            if self._coeffs is not None:
                return TimeReconstruction(
                    self.grid, np.zeros((self._n_intervals, 1, self._dim))
                )
            return TimeReconstruction(
                self.grid,
                states=self._states,
                stencil=np.zeros((1, 5)),
                n_intervals=self._n_intervals,
            )
        if self._coeffs is not None:
            return TimeReconstruction(self.grid, self._coeffs[:, order:, :])
        return TimeReconstruction(
            self.grid,
            states=self._states,
            stencil=self._stencil[order:],
            n_intervals=self._n_intervals,
        )

    def interval_index(self, t, side="right"):
        """Index of the interval containing t; exact breakpoints resolve to the
        left polynomial when side='left'.  Breakpoints hit up to roundoff are
        snapped so that t = n * tau never lands on the wrong interval."""
        t = np.asarray(t, dtype=float)
        ratio = t / self.grid.tau
        n = np.floor(ratio).astype(int)
        tol = 64.0 * np.finfo(float).eps * np.maximum(np.abs(ratio), 1.0)
        n = n + (ratio - n > 1.0 - tol)
        n = np.clip(n, 0, self._n_intervals - 1)
        if side == "left":
            on_node = (np.abs(ratio - n) <= tol) & (n > 0)
            n = n - on_node
        elif side != "right":
            raise ValueError("side must be 'left' or 'right'")
        return n

    def value(self, t, side="right"):
        """Values at times t, shaped (len(t), dim).  t must lie in [0, t_end]."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t < 0) or np.any(t > self.t_end * (1 + 1e-12)):
            raise ValueError("time outside the reconstructed range")
        n = self.interval_index(t, side)
        s = t - self.grid.tau * n
        local = self._coeffs_at(n)
        out = local[:, -1, :] / _FACTORIALS[self.order]
        for j in range(self.order - 1, -1, -1):
            out = out * s[:, None] + local[:, j, :] / _FACTORIALS[j]
        return out


def reconstruct_R(seq, grid):
    """Continuous piecewise-quadratic reconstruction of a state sequence.

    Interval n combines V^{n-1}, V^n, V^{n+1} (zero-extended below n = 0);
    the sequence must provide at least two states.
    """
    states = _states_array(seq)
    n_intervals = states.shape[0] - 1
    if n_intervals < 1:
        raise ValueError("quadratic reconstruction needs at least two states")
    return TimeReconstruction(
        grid, states=states, stencil=r_time_stencil(grid.tau), n_intervals=n_intervals
    )


def reconstruct_L(seq, grid):
    """Twice continuously differentiable piecewise-quartic reconstruction.

    Interval n combines V^{n-2} ... V^{n+2}, so the last reconstructed
    interval ends two steps before the last stored state.
    """
    states = _states_array(seq)
    n_intervals = states.shape[0] - 3
    if n_intervals < 1:
        raise ValueError("quartic reconstruction needs at least four states")
    return TimeReconstruction(
        grid, states=states, stencil=l_time_stencil(grid.tau), n_intervals=n_intervals
    )


def delta(seq, grid):
    """Gap between the quadratic and quartic reconstructions of the same states.

    Returns a quartic piecewise polynomial; its time derivative is only
    piecewise continuous, and boundary evaluations of that derivative should
    use the left interval (side='left').
    """
    states = _states_array(seq)
    n_intervals = states.shape[0] - 3
    if n_intervals < 1:
        raise ValueError("reconstruction gap needs at least four states")
    tau = grid.tau
    stencil = np.vstack([r_time_stencil(tau), np.zeros((2, 5))]) - l_time_stencil(tau)
    return TimeReconstruction(grid, states=states, stencil=stencil, n_intervals=n_intervals)


def continuity_jumps(recon, orders=(0, 1, 2)):
    """Largest relative jump of the given derivatives across interior breakpoints."""
    tau = recon.grid.tau
    worst = 0.0
    for d in orders:
        der = recon.derivative(d) if d else recon
        if der.n_intervals < 2:
            continue
        left = der.value(tau * np.arange(1, der.n_intervals), side="left")
        right = der.coeff_block(1, der.n_intervals)[:, 0, :]
        scale = 1.0 + np.linalg.norm(right, axis=1)
        jump = np.linalg.norm(left - right, axis=1) / scale
        worst = max(worst, float(jump.max()))
    return worst


def _gauss_times(grid, n_intervals, n_pts=5):
    x, w = np.polynomial.legendre.leggauss(n_pts)
    xi = 0.5 * (x + 1.0)
    return (grid.tau * (np.arange(n_intervals)[:, None] + xi[None, :])).ravel()


def verify_commuting(seq, grid):
    """Residual of the identity: second derivative of the quartic reconstruction
    equals the quadratic reconstruction of the discrete acceleration.

    Returns the largest normalized mismatch over five Gauss points per interval.
    """
    l = reconstruct_L(seq, grid)
    states = _states_array(seq)
    p = np.vstack([np.zeros((1, states.shape[1])), states])
    acc = (p[2:] - 2.0 * p[1:-1] + p[:-2]) / grid.tau**2
    r_acc = reconstruct_R(acc, grid)
    times = _gauss_times(grid, l.n_intervals)
    lhs = l.derivative(2).value(times)
    rhs = r_acc.value(times)
    scale = 1.0 + np.linalg.norm(rhs, axis=1)
    return float((np.linalg.norm(lhs - rhs, axis=1) / scale).max())


def verify_reconstructed_equation(seq, grid, space, loads):
    """Residual of the reconstructed equation on a solver trajectory.

    The quartic reconstruction's acceleration, tested through the mass matrix,
    plus the stiffness action on the quadratic reconstruction must reproduce
    the quadratic reconstruction of the load vectors.  loads[0] is the load of
    the (rest) starting step and must be zero for solver output.
    """
    loads = np.asarray(loads, dtype=float)
    w = reconstruct_L(seq, grid)
    u = reconstruct_R(seq, grid)
    n = w.n_intervals
    if loads.shape[0] < n + 2:
        raise ValueError("need load vectors one step beyond the reconstructed range")
    f_tau = reconstruct_R(loads, grid)
    wdd = w.derivative(2).coeff_block(0, n)
    uc = u.coeff_block(0, n)
    fc = f_tau.coeff_block(0, n)
    resid = np.empty((n, 3, space.dofs))
    for j in range(3):
        resid[:, j, :] = (
            space.mass.matmat(wdd[:, j, :].T).T
            + space.stiffness.matmat(uc[:, j, :].T).T
            - fc[:, j, :]
        )
    resid_rec = TimeReconstruction(grid, resid)
    times = _gauss_times(grid, n)
    rvals = np.linalg.norm(resid_rec.value(times), axis=1)
    fvals = np.linalg.norm(f_tau.value(times), axis=1)
    return float((rvals / (1.0 + fvals)).max())


class SourceReconstruction:
    """Quadratic-in-time reconstruction of a space-time source, pointwise in x.

    Samples F^n = f(t_n, .) on the grid nodes are combined with the same
    stencil as the state reconstruction, with zero extension below n = 0.  The
    evaluator reproduces f exactly at the nodes.  When the source factors as
    time_profile(t) * space_profile(x) the factors can be supplied so that
    consumers may collapse spatial work to precomputed profiles.  zero_start
    forces the n = 0 sample to zero, matching a solver driven from rest whose
    starting load never enters the scheme.
    """

    def __init__(
        self,
        f,
        grid,
        n_intervals=None,
        time_profile=None,
        space_profile=None,
        zero_start=False,
    ):
        self.f = f
        self.grid = grid
        self.n_intervals = grid.n_steps if n_intervals is None else n_intervals
        self.time_profile = time_profile
        self.space_profile = space_profile
        self.zero_start = bool(zero_start)

    @property
    def separable(self):
        return self.time_profile is not None and self.space_profile is not None

    def sample(self, n, x):
        """Sample f(t_n, x), zero-extended below n = 0 (and at n = 0 when zero_start)."""
        if n < 0 or (n == 0 and self.zero_start):
            return np.zeros_like(np.asarray(x, dtype=float))
        return np.asarray(self.f(self.grid.tau * n, x), dtype=float)

    def __call__(self, t, x):
        """Values f_tau(t, x) for scalar t and array x."""
        tau = self.grid.tau
        t = float(t)
        if t < 0 or t > tau * self.n_intervals * (1 + 1e-12):
            raise ValueError("time outside the reconstructed range")
        n = min(int(np.floor(t / tau)), self.n_intervals - 1)
        s = t - tau * n
        fm = self.sample(n - 1, x)
        f0 = self.sample(n, x)
        fp = self.sample(n + 1, x)
        return f0 + (fp - fm) * (0.5 * s / tau) + (fp - 2.0 * f0 + fm) * (0.5 * s**2 / tau**2)

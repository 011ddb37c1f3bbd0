"""Damped time integrals and error measures of solver trajectories.

All quantities are integrals or sums of spatial norms against the weight
e^{-2 rho t}, truncated at the grid horizon.  Time integration uses a fixed
Gauss rule per slab; since the weight factors into a per-slab part and a
node part, polynomial integrands contract against precomputed moments and
produce exactly the nodal rule's value.

Two evaluation paths are provided for the error measures: a blocked general
path that samples the exact solution on the space-time quadrature grid, and a
streaming path for separable solutions g(t) * S(x) that reconstructs over a
rolling window of recent states so long trajectories are never stored.  Both
square the pointwise difference against the exact solution before
integrating; expanding the square into inner products would cancel ten or
more digits on long runs and drown small errors in accumulated roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from leapwave.fem1d import gauss_rule, quadrature_grid
from leapwave.reconstruct import l_time_stencil, r_time_stencil

__all__ = [
    "DampedAccumulator",
    "ErrorMeasures",
    "SeparableSolution",
    "StreamingMeasures",
    "damped_time_integral",
    "damped_energy_norm",
    "error_measures",
    "load_dual_norms_sq",
]

_FACT = np.array([1.0, 1.0, 2.0, 6.0, 24.0])


class DampedAccumulator:
    """Gauss quadrature of t -> q(t) e^{-2 rho t} per slab over [0, t_star].

    The weight splits as e^{-2 rho t_n} e^{-2 rho s}; node damps, damped slab
    weights and the damped moments of s^m are precomputed so that polynomial
    per-slab integrands can be contracted without visiting quadrature nodes.
    """

    def __init__(self, rho, grid, gauss_order=10):
        if not rho > 0:
            raise ValueError("damping rate must be positive")
        self.rho = float(rho)
        self.grid = grid
        self.gauss_order = int(gauss_order)
        rule = gauss_rule(self.gauss_order)
        tau = grid.tau
        self.s_nodes = tau * rule.points
        self.slab_weights = tau * rule.weights * np.exp(-2.0 * self.rho * self.s_nodes)
        self.node_damps = np.exp(-2.0 * self.rho * tau * np.arange(grid.n_steps))
        self.node_sum_weights = tau * np.exp(
            -2.0 * self.rho * tau * np.arange(grid.n_steps + 1)
        )
        self.moments = np.array(
            [self.slab_weights @ self.s_nodes**m for m in range(13)]
        )

    def times_block(self, n0, n1):
        """Quadrature times of slabs n0 ... n1-1, shaped (n1-n0, order)."""
        starts = self.grid.tau * np.arange(n0, n1)
        return starts[:, None] + self.s_nodes[None, :]

    def integrate_values(self, values, n0):
        """Contract integrand values sampled on times_block(n0, ...) slabs."""
        n1 = n0 + values.shape[0]
        return float(self.node_damps[n0:n1] @ (values @ self.slab_weights))

    def integrate_callable(self, fn, block=2048):
        total = 0.0
        for n0 in range(0, self.grid.n_steps, block):
            n1 = min(n0 + block, self.grid.n_steps)
            tb = self.times_block(n0, n1)
            vals = np.asarray(fn(tb.ravel()), dtype=float).reshape(tb.shape)
            total += self.integrate_values(vals, n0)
        return total


def damped_time_integral(integrand, grid, rho, gauss_order=10):
    """Integral of integrand(t) e^{-2 rho t} over [0, t_star] by per-slab Gauss.

    The integrand must accept a 1D array of times.
    """
    return DampedAccumulator(rho, grid, gauss_order).integrate_callable(integrand)


def _power_table(n_coeff, s_nodes):
    """Table s^j / j! over quadrature offsets, shaped (n_coeff, order)."""
    return np.vstack([s_nodes**j / _FACT[j] for j in range(n_coeff)])


def _fe_norm_sq_block(operator, flat):
    """Rowwise quadratic forms c^T A c for a (rows, dofs) coefficient block."""
    return np.einsum("ij,ij->i", flat, operator.matmat(flat.T).T)


def damped_energy_norm(recon, rho, grid, space, gauss_order=10, block=256):
    """Damped energy norm of an FE-valued reconstruction.

    Square root of the damped integral of the squared time-derivative mass
    norm plus the squared stiffness (gradient) norm.
    """
    if recon.n_intervals < grid.n_steps:
        raise ValueError("reconstruction does not cover the horizon")
    acc = DampedAccumulator(rho, grid, gauss_order)
    rdot = recon.derivative(1)
    tab_v = _power_table(recon.order + 1, acc.s_nodes)
    tab_d = _power_table(max(recon.order, 1), acc.s_nodes)
    total = 0.0
    for n0 in range(0, grid.n_steps, block):
        n1 = min(n0 + block, grid.n_steps)
        cv = recon.coeff_block(n0, n1)
        cd = rdot.coeff_block(n0, n1)
        vals = np.einsum("njd,jq->nqd", cv, tab_v).reshape(-1, recon.dim)
        dots = np.einsum("njd,jq->nqd", cd, tab_d[: cd.shape[1]]).reshape(-1, recon.dim)
        q = _fe_norm_sq_block(space.stiffness, vals) + _fe_norm_sq_block(
            space.mass, dots
        )
        total += acc.integrate_values(q.reshape(n1 - n0, -1), n0)
    return float(np.sqrt(max(total, 0.0)))


@dataclass(frozen=True)
class ErrorMeasures:
    """The nine damped error quantities of a run against the exact solution.

    Discrete-node quantities carry the trajectory suffix _U; _u and _w refer
    to the quadratic and quartic reconstructions.  The discrete velocity in
    et_U is the two-step difference divided by a single time step, matching
    the reported quantity rather than a consistent derivative.
    """

    e_U: float
    e_u: float
    e_w: float
    ex_U: float
    ex_u: float
    ex_w: float
    et_U: float
    et_u: float
    et_w: float

    @property
    def E_rho(self):
        return float(np.hypot(self.et_w, self.ex_w))

    def as_dict(self):
        return {
            "e_U": self.e_U,
            "e_u": self.e_u,
            "e_w": self.e_w,
            "ex_U": self.ex_U,
            "ex_u": self.ex_u,
            "ex_w": self.ex_w,
            "et_U": self.et_U,
            "et_u": self.et_u,
            "et_w": self.et_w,
        }


def error_measures(seq, recon_u, recon_w, exact, rho, grid, gauss_order=10, n_quad=None):
    """All nine damped error measures of a trajectory, blocked general path.

    exact must provide eval_grid(times, x) -> (u, u_t, u_x) arrays of shape
    (len(times), len(x)).  Continuous integrals run over the grid's slabs;
    discrete sums cover nodes 0 ... n_steps, whose velocity needs one state
    beyond the horizon.
    """
    space = seq.space
    n_steps = grid.n_steps
    if recon_u.n_intervals < n_steps or recon_w.n_intervals < n_steps:
        raise ValueError("reconstructions do not cover the horizon")
    if seq.n_states < n_steps + 2:
        raise ValueError("need one state beyond the horizon for the node velocity")
    acc = DampedAccumulator(rho, grid, gauss_order)
    xq, wq, rule = quadrature_grid(space, n_quad)
    e0 = space.evaluation_matrix(rule.points, deriv=0)
    e1 = space.evaluation_matrix(rule.points, deriv=1)
    tau = grid.tau
    order = acc.gauss_order

    recs = {
        "u": (recon_u, recon_u.derivative(1)),
        "w": (recon_w, recon_w.derivative(1)),
    }
    cont = {key: 0.0 for key in ("e_u", "e_w", "ex_u", "ex_w", "et_u", "et_w")}

    block = max(8, int(2.5e6 / max(xq.size * order, 1)))
    for n0 in range(0, n_steps, block):
        n1 = min(n0 + block, n_steps)
        tb = acc.times_block(n0, n1)
        ex_u, ex_ut, ex_ux = exact.eval_grid(tb.ravel(), xq)
        tw = (acc.node_damps[n0:n1, None] * acc.slab_weights[None, :]).ravel()
        for key, (rec, rec_dot) in recs.items():
            cv = rec.coeff_block(n0, n1)
            cd = rec_dot.coeff_block(n0, n1)
            vals = np.einsum(
                "njd,jq->nqd", cv, _power_table(cv.shape[1], acc.s_nodes)
            ).reshape(-1, space.dofs)
            dots = np.einsum(
                "njd,jq->nqd", cd, _power_table(cd.shape[1], acc.s_nodes)
            ).reshape(-1, space.dofs)
            err = ex_u - (e0 @ vals.T).T
            cont["e_" + key] += tw @ ((err * err) @ wq)
            err = ex_ux - (e1 @ vals.T).T
            cont["ex_" + key] += tw @ ((err * err) @ wq)
            err = ex_ut - (e0 @ dots.T).T
            cont["et_" + key] += tw @ ((err * err) @ wq)

    disc = {"e_U": 0.0, "ex_U": 0.0, "et_U": 0.0}
    states = seq.states
    nblock = max(64, int(2.5e6 / max(xq.size, 1)))
    for n0 in range(0, n_steps + 1, nblock):
        n1 = min(n0 + nblock, n_steps + 1)
        tn = tau * np.arange(n0, n1)
        ex_u, ex_ut, ex_ux = exact.eval_grid(tn, xq)
        wn = acc.node_sum_weights[n0:n1]
        un = states[n0:n1]
        up = states[n0 + 1 : n1 + 1]
        if n0 == 0:
            um = np.vstack([np.zeros((1, space.dofs)), states[: n1 - 1]])
        else:
            um = states[n0 - 1 : n1 - 1]
        vel = (up - um) / tau
        err = ex_u - (e0 @ un.T).T
        disc["e_U"] += wn @ ((err * err) @ wq)
        err = ex_ux - (e1 @ un.T).T
        disc["ex_U"] += wn @ ((err * err) @ wq)
        err = ex_ut - (e0 @ vel.T).T
        disc["et_U"] += wn @ ((err * err) @ wq)

    vals = {**cont, **disc}
    return ErrorMeasures(**{k: float(np.sqrt(max(v, 0.0))) for k, v in vals.items()})


def load_dual_norms_sq(space, loads):
    """Squared L2 norms of the Riesz representatives of mass-weighted loads.

    For each row F the value is F^T M^{-1} F, the squared norm of the FE
    function whose mass projection is F.
    """
    loads = np.atleast_2d(np.asarray(loads, dtype=float))
    sol = space.mass.solve(loads.T)
    return np.einsum("ij,ij->j", loads.T, sol)


@dataclass(frozen=True)
class SeparableSolution:
    """Exact solution of product form g(t) * S(x) for the streaming path.

    time_values maps a time array to (g, g') and the space callables return
    S and S' pointwise.
    """

    time_values: Callable
    space_profile: Callable
    space_gradient: Callable


class StreamingMeasures:
    """Online error measures for separable exact solutions.

    Feed states to on_state during the march (indices 0 ... n_steps + 2).  A
    rolling window of recent states is kept; whenever it fills, the slabs and
    nodes it completes are reconstructed, compared with g(t) * S(x) pointwise
    on the quadrature grid and accumulated, then the window shifts.  Slab n
    needs states n-2 ... n+2 and node n needs n-1 ... n+1, so four live rows
    survive each shift.  finalize() returns the same nine quantities as
    error_measures.
    """

    def __init__(self, space, grid, rho, solution, gauss_order=10, n_quad=None):
        self.space = space
        self.grid = grid
        self.solution = solution
        self.acc = DampedAccumulator(rho, grid, gauss_order)
        xq, wq, rule = quadrature_grid(space, n_quad)
        self.wq = wq
        self.e0 = space.evaluation_matrix(rule.points, deriv=0)
        self.e1 = space.evaluation_matrix(rule.points, deriv=1)
        self.s_vals = np.asarray(solution.space_profile(xq), dtype=float)
        self.sx_vals = np.asarray(solution.space_gradient(xq), dtype=float)
        self.r_st = r_time_stencil(grid.tau)
        self.l_st = l_time_stencil(grid.tau)
        self.last_state = grid.n_steps + 2
        block = max(8, int(2.5e6 / max(xq.size * self.acc.gauss_order, 1)))
        # rows map to state indices _base ... _base + block + 3; the two
        # leading zero rows realize the zero extension below index 0
        self._win = np.zeros((block + 4, space.dofs))
        self._base = -2
        self._seen = -1
        self._done_slabs = 0
        self._done_nodes = 0
        self._cont = dict.fromkeys(("e_u", "ex_u", "et_u", "e_w", "ex_w", "et_w"), 0.0)
        self._disc = dict.fromkeys(("e_U", "ex_U", "et_U"), 0.0)

    def _exact_at(self, times):
        g, gd = self.solution.time_values(times)
        g = np.asarray(g, dtype=float)[:, None]
        gd = np.asarray(gd, dtype=float)[:, None]
        return g * self.s_vals, gd * self.s_vals, g * self.sx_vals

    def on_state(self, m, state):
        if m != self._seen + 1:
            raise ValueError("states must be fed in order without gaps")
        self._seen = m
        if m > self.last_state:
            return
        self._win[m - self._base] = state
        if m - self._base == self._win.shape[0] - 1:
            self._process()
            base = self._done_slabs - 2
            shift = base - self._base
            self._win[: self._win.shape[0] - shift] = self._win[shift:]
            self._win[self._win.shape[0] - shift :] = 0.0
            self._base = base

    def _window_coeffs(self, stencil, n0, n1):
        """Taylor coefficient blocks of slabs n0 ... n1-1 from the window."""
        out = np.zeros((n1 - n0, stencil.shape[0], self.space.dofs))
        for d in range(5):
            seg = self._win[n0 - 2 + d - self._base : n1 - 2 + d - self._base]
            out += stencil[None, :, d, None] * seg[:, None, :]
        return out

    def _process(self):
        acc = self.acc
        f = min(self._seen, self.last_state)
        n0, n1 = self._done_slabs, min(f - 1, self.grid.n_steps)
        if n1 > n0:
            tb = acc.times_block(n0, n1)
            ex_u, ex_ut, ex_ux = self._exact_at(tb.ravel())
            tw = (acc.node_damps[n0:n1, None] * acc.slab_weights[None, :]).ravel()
            for key, st in (("u", self.r_st), ("w", self.l_st)):
                cv = self._window_coeffs(st, n0, n1)
                vals = np.einsum(
                    "njd,jq->nqd", cv, _power_table(cv.shape[1], acc.s_nodes)
                ).reshape(-1, self.space.dofs)
                dots = np.einsum(
                    "njd,jq->nqd", cv[:, 1:], _power_table(cv.shape[1] - 1, acc.s_nodes)
                ).reshape(-1, self.space.dofs)
                err = ex_u - (self.e0 @ vals.T).T
                self._cont["e_" + key] += tw @ ((err * err) @ self.wq)
                err = ex_ux - (self.e1 @ vals.T).T
                self._cont["ex_" + key] += tw @ ((err * err) @ self.wq)
                err = ex_ut - (self.e0 @ dots.T).T
                self._cont["et_" + key] += tw @ ((err * err) @ self.wq)
            self._done_slabs = n1
        k0, k1 = self._done_nodes, min(f, self.grid.n_steps + 1)
        if k1 > k0:
            tau = self.grid.tau
            ex_u, ex_ut, ex_ux = self._exact_at(tau * np.arange(k0, k1))
            wn = acc.node_sum_weights[k0:k1]
            b = self._base
            un = self._win[k0 - b : k1 - b]
            vel = (self._win[k0 + 1 - b : k1 + 1 - b] - self._win[k0 - 1 - b : k1 - 1 - b]) / tau
            err = ex_u - (self.e0 @ un.T).T
            self._disc["e_U"] += wn @ ((err * err) @ self.wq)
            err = ex_ux - (self.e1 @ un.T).T
            self._disc["ex_U"] += wn @ ((err * err) @ self.wq)
            err = ex_ut - (self.e0 @ vel.T).T
            self._disc["et_U"] += wn @ ((err * err) @ self.wq)
            self._done_nodes = k1

    def finalize(self):
        if self._seen < self.last_state:
            raise ValueError("trajectory ended before the horizon plus overhang")
        self._process()
        out = {**self._cont, **self._disc}
        return ErrorMeasures(
            **{k: float(np.sqrt(max(v, 0.0))) for k, v in out.items()}
        )

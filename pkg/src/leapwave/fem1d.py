"""Lagrange finite elements on uniform 1D meshes with banded symmetric operators.

Continuous piecewise-polynomial spaces of degree 1, 2 or 3 on an interval,
with homogeneous Dirichlet conditions eliminated at assembly time.  Mass and
stiffness matrices are stored in symmetric banded form and solved through a
cached banded Cholesky factorization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.linalg import cho_solve_banded, cholesky_banded

__all__ = [
    "QuadratureRule",
    "UniformMesh1D",
    "LagrangeSpace",
    "BandedSymmetricOperator",
    "gauss_rule",
    "assemble_mass",
    "assemble_stiffness",
    "load_vector",
    "quadrature_grid",
    "solve_spd",
    "evaluate",
    "spatial_norms",
]


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre nodes and weights on the reference cell [0, 1]."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if self.points.ndim != 1 or self.points.shape != self.weights.shape:
            raise ValueError("points and weights must be 1D arrays of equal length")


def gauss_rule(n_points):
    """Gauss-Legendre rule on [0, 1], exact for polynomials of degree 2*n_points - 1."""
    if n_points < 1:
        raise ValueError("quadrature rule needs at least one point")
    x, w = np.polynomial.legendre.leggauss(n_points)
    return QuadratureRule(points=0.5 * (x + 1.0), weights=0.5 * w)


@dataclass(frozen=True)
class UniformMesh1D:
    """Uniform partition of (left, right) into n_cells cells."""

    left: float
    right: float
    n_cells: int

    def __post_init__(self):
        if not self.right > self.left:
            raise ValueError("mesh requires right > left")
        if self.n_cells < 1:
            raise ValueError("mesh requires at least one cell")

    @property
    def h(self):
        return (self.right - self.left) / self.n_cells

    @property
    def length(self):
        return self.right - self.left

    def vertices(self):
        return self.left + self.h * np.arange(self.n_cells + 1)

    def cell_left(self, i):
        return self.left + self.h * np.asarray(i)


def _reference_basis_coeffs(degree):
    """Monomial coefficients of the Lagrange basis at equispaced nodes of [0, 1].

    Column j holds the coefficients of the basis function attached to node j/degree,
    lowest power first.
    """
    nodes = np.arange(degree + 1) / degree
    vander = np.vander(nodes, increasing=True)
    return np.linalg.inv(vander)


class LagrangeSpace:
    """Continuous Lagrange space of degree k on a uniform mesh, zero trace at both ends.

    Global nodes are equispaced with spacing h/k; the two boundary nodes are
    eliminated, leaving dofs = k * n_cells - 1 interior unknowns.
    """

    def __init__(self, mesh, degree):
        if degree not in (1, 2, 3):
            raise ValueError("degree must be 1, 2 or 3")
        self.mesh = mesh
        self.degree = degree
        self.dofs = degree * mesh.n_cells - 1
        if self.dofs < 1:
            raise ValueError("space has no interior degrees of freedom")
        self._basis_coeffs = _reference_basis_coeffs(degree)
        self._eval_matrices = {}
        self._mass = None
        self._stiffness = None

    @property
    def node_coords(self):
        """Coordinates of the interior global nodes, left to right."""
        k = self.degree
        step = self.mesh.h / k
        return self.mesh.left + step * np.arange(1, k * self.mesh.n_cells)

    def ref_eval(self, xi, deriv=0):
        """Values of the k+1 reference basis functions at points xi of [0, 1].

        Returns an array of shape (k + 1, len(xi)).  deriv=1 gives d/dxi.
        """
        xi = np.asarray(xi, dtype=float)
        k = self.degree
        out = np.zeros((k + 1, xi.size))
        for j in range(k + 1):
            c = self._basis_coeffs[:, j].copy()
            for _ in range(deriv):
                c = c[1:] * np.arange(1, c.size)
            out[j] = np.polynomial.polynomial.polyval(xi.ravel(), c)
        return out

    def cell_dofs(self, c):
        """Global dof indices of cell c; -1 marks the eliminated boundary nodes."""
        k = self.degree
        g = c * k + np.arange(k + 1)
        dof = g - 1
        dof[(g == 0) | (g == k * self.mesh.n_cells)] = -1
        return dof

    def evaluation_matrix(self, ref_points, deriv=0):
        """Sparse map from dof vectors to values at the given reference points of every cell.

        Rows are ordered cell by cell; derivatives include the 1/h scaling.
        """
        key = (tuple(np.asarray(ref_points).tolist()), deriv)
        if key in self._eval_matrices:
            return self._eval_matrices[key]
        ref_points = np.asarray(ref_points, dtype=float)
        k, n, h = self.degree, self.mesh.n_cells, self.mesh.h
        vals = self.ref_eval(ref_points, deriv) / h**deriv
        n_pts = ref_points.size
        rows, cols, data = [], [], []
        for c in range(n):
            dof = self.cell_dofs(c)
            for j in range(k + 1):
                if dof[j] < 0:
                    continue
                rows.append(c * n_pts + np.arange(n_pts))
                cols.append(np.full(n_pts, dof[j]))
                data.append(vals[j])
        mat = sparse.csr_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n * n_pts, self.dofs),
        )
        self._eval_matrices[key] = mat
        return mat

    def _assemble(self, deriv):
        k, n, h = self.degree, self.mesh.n_cells, self.mesh.h
        rule = gauss_rule(k + 1)
        vals = self.ref_eval(rule.points, deriv)
        local = h ** (1 - 2 * deriv) * (vals * rule.weights) @ vals.T
        band = np.zeros((k + 1, self.dofs))
        for c in range(n):
            dof = self.cell_dofs(c)
            for a in range(k + 1):
                if dof[a] < 0:
                    continue
                for b in range(a, k + 1):
                    if dof[b] < 0:
                        continue
                    i, j = sorted((dof[a], dof[b]))
                    band[j - i, i] += local[a, b]
        return BandedSymmetricOperator(band)

    @property
    def mass(self):
        if self._mass is None:
            self._mass = self._assemble(0)
        return self._mass

    @property
    def stiffness(self):
        if self._stiffness is None:
            self._stiffness = self._assemble(1)
        return self._stiffness

    def interpolate(self, f):
        """Nodal interpolant: coefficient vector of f sampled at the interior nodes."""
        return np.asarray(f(self.node_coords), dtype=float)


class BandedSymmetricOperator:
    """Symmetric positive semidefinite matrix in lower banded storage.

    band[r, j] holds entry (j + r, j); row 0 is the diagonal.  A Cholesky
    factorization and a CSR copy are built on first use and cached.
    """

    def __init__(self, band):
        band = np.asarray(band, dtype=float)
        if band.ndim != 2:
            raise ValueError("band storage must be 2D")
        self.band = band
        self.dim = band.shape[1]
        self.half_bandwidth = band.shape[0] - 1
        self._cho = None
        self._csr = None

    @property
    def csr(self):
        if self._csr is None:
            n_off = min(self.half_bandwidth, self.dim - 1) + 1
            diags = [self.band[r, : self.dim - r] for r in range(n_off)]
            offsets = list(range(n_off))
            upper = sparse.diags(diags, offsets, shape=(self.dim, self.dim))
            if n_off > 1:
                strict = sparse.diags(diags[1:], offsets[1:], shape=(self.dim, self.dim))
                upper = upper + strict.T
            self._csr = upper.tocsr()
        return self._csr

    def matvec(self, x):
        return self.csr @ x

    def matmat(self, x):
        return self.csr @ x

    def to_dense(self):
        return self.csr.toarray()

    def quadratic_form(self, x, y=None):
        """x^T A y along the last axis; y defaults to x."""
        ax = self.csr @ (x if x.ndim == 1 else x.T)
        other = x if y is None else y
        if x.ndim == 1:
            return float(other @ ax)
        return np.einsum("nd,dn->n", other, ax)

    @property
    def cholesky(self):
        if self._cho is None:
            try:
                self._cho = cholesky_banded(self.band, lower=True)
            except np.linalg.LinAlgError as exc:
                raise np.linalg.LinAlgError("matrix not SPD") from exc
        return self._cho

    def solve(self, b):
        """Solve A x = b through the cached banded Cholesky factorization."""
        return cho_solve_banded((self.cholesky, True), b)


def assemble_mass(space):
    """Mass matrix of the space in banded symmetric storage."""
    return space.mass


def assemble_stiffness(space):
    """Stiffness matrix of the space in banded symmetric storage."""
    return space.stiffness


def load_vector(space, f, n_quad=None, deriv=0):
    """Vector of (f, d^deriv phi_i) over the mesh by per-cell Gauss quadrature.

    f is evaluated pointwise; the default rule uses degree + 6 points per cell,
    enough to integrate smooth data to near machine precision.  deriv=1 tests
    f against the basis derivatives instead of the basis values.
    """
    k, n, h = space.degree, space.mesh.n_cells, space.mesh.h
    rule = gauss_rule(k + 6 if n_quad is None else n_quad)
    x = (space.mesh.cell_left(np.arange(n))[:, None] + h * rule.points[None, :]).ravel()
    fx = np.asarray(f(x), dtype=float).reshape(n, rule.points.size)
    emat = space.evaluation_matrix(rule.points, deriv=deriv)
    return emat.T @ (fx * (h * rule.weights)).ravel()


def quadrature_grid(space, n_quad=None):
    """Composite per-cell Gauss rule over the whole mesh.

    Returns the global points, the matching global weights and the reference
    rule whose points feed evaluation_matrix for consistent sampling.
    """
    k, n, h = space.degree, space.mesh.n_cells, space.mesh.h
    rule = gauss_rule(k + 6 if n_quad is None else n_quad)
    x = (space.mesh.cell_left(np.arange(n))[:, None] + h * rule.points[None, :]).ravel()
    w = np.tile(h * rule.weights, n)
    return x, w, rule


def solve_spd(operator, b):
    """Solve operator @ x = b; the factorization is computed once and reused."""
    return operator.solve(b)


def evaluate(space, coeffs, x, deriv=0):
    """Point values (or first derivatives) of the FE function with the given coefficients.

    Points must lie in the closed domain.  At interior cell interfaces the
    derivative, which is discontinuous, is taken from the left cell.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    mesh, k = space.mesh, space.degree
    if np.any(x < mesh.left) or np.any(x > mesh.right):
        raise ValueError("evaluation point outside domain")
    cell = np.clip(np.floor((x - mesh.left) / mesh.h).astype(int), 0, mesh.n_cells - 1)
    if deriv == 1:
        on_iface = (x == mesh.cell_left(cell)) & (cell > 0)
        cell = cell - on_iface
    xi = (x - mesh.cell_left(cell)) / mesh.h
    full = np.concatenate(([0.0], np.asarray(coeffs, dtype=float), [0.0]))
    local = full[cell[:, None] * k + np.arange(k + 1)[None, :]]
    basis = space.ref_eval(xi, deriv) / mesh.h**deriv
    return np.einsum("pj,jp->p", local, basis)


def spatial_norms(space, coeffs, which="L2"):
    """L2 or H1-seminorm of an FE function, by quadrature exact for its degree."""
    k, h = space.degree, space.mesh.h
    rule = gauss_rule(k + 1)
    if which == "L2":
        vals = space.evaluation_matrix(rule.points, 0) @ coeffs
    elif which == "H1semi":
        vals = space.evaluation_matrix(rule.points, 1) @ coeffs
    else:
        raise ValueError("which must be 'L2' or 'H1semi'")
    w = np.tile(h * rule.weights, space.mesh.n_cells)
    return float(np.sqrt(np.sum(w * vals**2)))

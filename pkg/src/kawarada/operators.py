"""Semi-discrete diffusion operators.

With lexicographic ordering (x index fastest) the semi-discrete Laplacian
splits as ``M = Mx + My`` with

    Mx = a^-2 B (I_Ny kron Tx),   My = b^-2 B (Ty kron I_Nx),   B = diag(1 / sigma).

``Mx`` is block diagonal with one tridiagonal block per grid row and ``My``
has the same structure after an index transpose, so both are stored as a
:class:`LineOperator`: one shared h_min-scaled :class:`TridiagBlock` plus a
per-node weight ``1 / (a^2 sigma)``. The full ``M`` is also assembled as a
sparse matrix and factorized once for the ``M^-1`` solves of the stepper.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import AssemblyError, DiagnosticSizeError
from .grid import Mesh1D, Mesh2D

DIAGNOSTIC_MAX_SIZE = 4096


@dataclass(frozen=True)
class TridiagBlock:
    """``tridiag(l, m, n) / scale`` with the h_min-scaled entries stored.

    ``sub[i]`` multiplies ``u_{i-1}`` in row ``i`` (``sub[0]`` is zero) and
    ``sup[i]`` multiplies ``u_{i+1}`` (``sup[-1]`` is zero): the homogeneous
    Dirichlet values have been eliminated.
    """

    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray
    scale: float

    @property
    def n(self) -> int:
        return self.diag.size

    def apply(self, U: np.ndarray, axis: int = -1) -> np.ndarray:
        """Action of the block along ``axis`` of ``U`` (any number of lines)."""
        U = np.moveaxis(U, axis, -1)
        out = self.diag * U
        out[..., 1:] += self.sub[1:] * U[..., :-1]
        out[..., :-1] += self.sup[:-1] * U[..., 1:]
        return np.moveaxis(out / self.scale, -1, axis)

    def to_dense(self) -> np.ndarray:
        T = np.diag(self.diag) + np.diag(self.sub[1:], -1) + np.diag(self.sup[:-1], 1)
        return T / self.scale

    def to_sparse(self) -> sp.csr_matrix:
        return sp.diags([self.sub[1:], self.diag, self.sup[:-1]], [-1, 0, 1], format="csr") / self.scale


def assemble_tridiag(m: Mesh1D, h_min: float) -> TridiagBlock:
    """Three-point second difference on the nonuniform mesh ``m``."""
    prev = m.steps[:-1]
    cur = m.steps[1:]
    sub = 2.0 * h_min / (prev * (prev + cur))
    diag = -2.0 * h_min / (prev * cur)
    sup = 2.0 * h_min / (cur * (prev + cur))
    sub[0] = 0.0
    sup[-1] = 0.0
    return TridiagBlock(sub, diag, sup, h_min)


@dataclass(frozen=True)
class DegeneracyMatrix:
    """``B = diag(1 / sigma)`` over the interior nodes, lexicographic order."""

    sigma: np.ndarray
    inv_sigma: np.ndarray = field(init=False)

    def __post_init__(self):
        sigma = np.array(self.sigma, dtype=float).ravel()
        bad = np.flatnonzero(~(sigma > 0.0) | ~np.isfinite(sigma))
        if bad.size:
            k = int(bad[0])
            raise AssemblyError(f"sigma must be positive at interior nodes; sigma[{k}]={sigma[k]!r}")
        sigma.setflags(write=False)
        inv = 1.0 / sigma
        inv.setflags(write=False)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "inv_sigma", inv)

    @property
    def sigma_max(self) -> float:
        return float(self.sigma.max())

    @property
    def sigma_min(self) -> float:
        return float(self.sigma.min())

    @property
    def kappa(self) -> float:
        return self.sigma_max / self.sigma_min


class LineOperator:
    """Block-diagonal operator made of independent tridiagonal lines.

    ``axis="x"`` lines are grid rows (contiguous in the lexicographic vector);
    ``axis="y"`` lines are grid columns, reached by transposing the
    ``(ny, nx)`` view. Row ``i`` of line ``L`` reads
    ``weight[L, i] * (T u)_i`` where ``T`` is the shared block.
    """

    def __init__(self, block: TridiagBlock, weight: np.ndarray, axis: str, grid_shape: tuple[int, int]):
        if axis not in ("x", "y"):
            raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")
        self.block = block
        self.weight = np.asarray(weight, dtype=float)
        self.axis = axis
        self.grid_shape = tuple(grid_shape)
        if self.weight.shape != (self.n_lines, block.n):
            raise ValueError(f"weight shape {self.weight.shape} does not match lines {(self.n_lines, block.n)}")

    @property
    def n_lines(self) -> int:
        ny, nx = self.grid_shape
        return ny if self.axis == "x" else nx

    @property
    def size(self) -> int:
        return self.grid_shape[0] * self.grid_shape[1]

    def to_lines(self, v: np.ndarray) -> np.ndarray:
        """View a lexicographic vector (optionally with trailing batch axes) as (line, position, ...)."""
        V = v.reshape(self.grid_shape + v.shape[1:])
        return V if self.axis == "x" else np.swapaxes(V, 0, 1)

    def from_lines(self, L: np.ndarray) -> np.ndarray:
        V = L if self.axis == "x" else np.swapaxes(L, 0, 1)
        return np.ascontiguousarray(V).reshape((self.size,) + L.shape[2:])

    def line_coefficients(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Fully scaled (sub, diag, sup) per line, each of shape (n_lines, n)."""
        w = self.weight / self.block.scale
        return w * self.block.sub, w * self.block.diag, w * self.block.sup

    def matvec(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        L = self.to_lines(v)
        TL = self.block.apply(L, axis=1)
        w = self.weight.reshape(self.weight.shape + (1,) * (L.ndim - 2))
        return self.from_lines(w * TL)

    __matmul__ = matvec

    def rows(self):
        """Rows in (diag, sum of |off-diagonals|) form, lexicographic order."""
        lo, d, up = self.line_coefficients()
        return self.from_lines(d), self.from_lines(np.abs(lo) + np.abs(up))

    def to_sparse(self) -> sp.csr_matrix:
        lo, d, up = self.line_coefficients()
        pos = np.arange(self.size).reshape(self.grid_shape)
        if self.axis == "y":
            pos = pos.T
        rows, cols, vals = [pos.ravel()], [pos.ravel()], [d.ravel()]
        rows.append(pos[:, 1:].ravel()); cols.append(pos[:, :-1].ravel()); vals.append(lo[:, 1:].ravel())
        rows.append(pos[:, :-1].ravel()); cols.append(pos[:, 1:].ravel()); vals.append(up[:, :-1].ravel())
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(self.size, self.size)
        )

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()


class SplitOperator:
    """``Mx``, ``My`` and ``M = Mx + My`` for one (mesh, sigma) pair.

    The sparse LU factorization of ``M`` is built on first use and reused for
    every subsequent :meth:`solve`.
    """

    def __init__(self, mesh: Mesh2D, sigma: DegeneracyMatrix):
        if sigma.sigma.size != mesh.size:
            raise AssemblyError(f"sigma has {sigma.sigma.size} values for {mesh.size} interior nodes")
        self.mesh = mesh
        self.sigma = sigma
        h_min = mesh.h_min
        self.Tx = assemble_tridiag(mesh.mx, h_min)
        self.Ty = assemble_tridiag(mesh.my, h_min)
        inv = sigma.inv_sigma.reshape(mesh.shape)
        self.Mx = LineOperator(self.Tx, inv / mesh.a**2, "x", mesh.shape)
        self.My = LineOperator(self.Ty, (inv / mesh.b**2).T, "y", mesh.shape)
        self._M = None
        self._lu = None
        self._lock = threading.Lock()

    @property
    def size(self) -> int:
        return self.mesh.size

    @property
    def M(self) -> sp.csc_matrix:
        if self._M is None:
            self._M = (self.Mx.to_sparse() + self.My.to_sparse()).tocsc()
        return self._M

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return self.Mx.matvec(v) + self.My.matvec(v)

    __matmul__ = matvec

    def rows(self):
        dx, ox = self.Mx.rows()
        dy, oy = self.My.rows()
        return dx + dy, ox + oy

    def factorize(self):
        if self._lu is None:
            with self._lock:
                if self._lu is None:
                    lu = spla.splu(self.M)
                    if not np.all(np.isfinite(lu.U.diagonal())) or np.any(lu.U.diagonal() == 0.0):
                        raise AssemblyError("M is singular")
                    self._lu = lu
        return self._lu

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        lu = self.factorize()
        with self._lock:
            return lu.solve(np.asarray(rhs, dtype=float))

    def to_dense(self) -> np.ndarray:
        return self.M.toarray()


def assemble(mesh: Mesh2D, sigma_field) -> SplitOperator:
    """Build the split operator; ``sigma_field`` is a DegeneracyMatrix or node values."""
    return SplitOperator(mesh, as_degeneracy(sigma_field, mesh.size))


def as_degeneracy(sigma, size: int) -> DegeneracyMatrix:
    """Accept a DegeneracyMatrix, a scalar, or ``size`` nodal values."""
    if isinstance(sigma, DegeneracyMatrix):
        return sigma
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim == 0:
        sigma = np.full(size, float(sigma))
    return DegeneracyMatrix(sigma)


def solve_with_M(op: SplitOperator, rhs: np.ndarray) -> np.ndarray:
    return op.solve(rhs)


def _guard(op: SplitOperator):
    if op.size > DIAGNOSTIC_MAX_SIZE:
        raise DiagnosticSizeError(f"diagnostic limited to {DIAGNOSTIC_MAX_SIZE} unknowns, grid has {op.size}")


def inf_norm_of_M_inverse(op: SplitOperator) -> float:
    """Exact ``||M^-1||_inf`` from solves against all unit vectors."""
    _guard(op)
    Minv = op.solve(np.eye(op.size))
    return float(np.abs(Minv).sum(axis=1).max())


def commutator_inf_norm(op: SplitOperator) -> float:
    """``||Mx My - My Mx||_inf`` probed column by column with structured matvecs."""
    _guard(op)
    E = np.eye(op.size)
    C = op.Mx.matvec(op.My.matvec(E)) - op.My.matvec(op.Mx.matvec(E))
    return float(np.abs(C).sum(axis=1).max())


def log_norm_inf(A) -> float:
    """``mu_inf(A) = max_i (Re a_ii + sum_{j != i} |a_ij|)``."""
    if hasattr(A, "rows"):
        d, off = A.rows()
        return float(np.max(np.real(d) + off))
    if isinstance(A, TridiagBlock):
        A = A.to_sparse()
    if sp.issparse(A):
        A = sp.csr_matrix(A)
        d = A.diagonal()
        off = np.asarray(abs(A).sum(axis=1)).ravel() - np.abs(d)
        return float(np.max(np.real(d) + off))
    A = np.asarray(A)
    d = np.diag(A)
    off = np.abs(A).sum(axis=1) - np.abs(d)
    return float(np.max(np.real(d) + off))

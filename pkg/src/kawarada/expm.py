"""Split exponential propagators realised with [1/1] Pade resolvents.

``E(c A) ~ (I - c A / 2)^-1 (I + c A / 2)`` for a :class:`LineOperator` ``A``
costs one batched tridiagonal sweep per application. The Strang product

    Phi = Ex(tau / 2) Ey(tau) Ex(tau / 2)

approximates ``E(tau M)`` to second order in ``tau``.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import lapack

from .errors import ContractViolation
from .operators import LineOperator, SplitOperator


class TridiagFactor:
    """LU factors of a batch of tridiagonal systems.

    ``lower``, ``diag``, ``upper`` have shape (n_lines, n); ``lower[:, 0]`` and
    ``upper[:, -1]`` are ignored. The lines are chained into one block-diagonal
    system and factorized by LAPACK ``gttrf``. Right-hand sides are (n_lines, n, ...).
    """

    def __init__(self, lower: np.ndarray, diag: np.ndarray, upper: np.ndarray):
        self.shape = diag.shape
        self._inv = None
        if self.shape[1] == 1:
            # single-node lines: the system is diagonal
            bad = np.flatnonzero(diag[:, 0] == 0.0)
            if bad.size:
                raise ContractViolation(f"singular line system: line {int(bad[0])}, row 0")
            self._inv = 1.0 / np.asarray(diag, dtype=float)
            return
        dl = np.array(lower, dtype=float)
        du = np.array(upper, dtype=float)
        dl[:, 0] = 0.0
        du[:, -1] = 0.0
        # couplings between consecutive lines are zero by construction
        dl, d, du = dl.ravel()[1:], np.array(diag, dtype=float).ravel(), du.ravel()[:-1]
        # the gttrf wrapper mishandles n = 2; pad with decoupled identity rows
        self._pad = max(0, 3 - d.size)
        if self._pad:
            dl, du = (np.concatenate([x, np.zeros(self._pad)]) for x in (dl, du))
            d = np.concatenate([d, np.ones(self._pad)])
        factors = lapack.dgttrf(dl, d, du)
        *self._lu, info = factors
        if info > 0:
            line, row = divmod(info - 1, self.shape[1])
            raise ContractViolation(f"singular line system: line {line}, row {row}")

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        if self._inv is not None:
            return rhs * self._inv.reshape(self._inv.shape + (1,) * (rhs.ndim - 2))
        b = rhs.reshape(self.shape[0] * self.shape[1], -1)
        if self._pad:
            b = np.vstack([b, np.zeros((self._pad, b.shape[1]))])
        x, info = lapack.dgttrs(*self._lu, b)
        x = x[: b.shape[0] - self._pad]
        if info != 0:
            raise ContractViolation(f"gttrs failed with info={info}")
        return x.reshape(rhs.shape)


class Propagator:
    """``E(fraction * tau * A)`` through the Pade resolvent, factors cached per tau."""

    def __init__(self, op: LineOperator, fraction: float = 1.0, tau: float = 0.0):
        self.op = op
        self.fraction = float(fraction)
        self._coeffs = op.line_coefficients()
        self._tau = None
        self._factor = None
        self.set_tau(tau)

    @property
    def tau(self) -> float:
        return self._tau

    def set_tau(self, tau: float):
        tau = float(tau)
        if tau < 0.0 or not np.isfinite(tau):
            raise ContractViolation(f"tau must be finite and >= 0, got {tau!r}")
        if tau != self._tau:
            self._tau = tau
            self._factor = None
        return self

    @property
    def half_arg(self) -> float:
        """``c`` in ``(I - c A)^-1 (I + c A)``."""
        return 0.5 * self.fraction * self._tau

    def factor(self) -> TridiagFactor:
        if self._factor is None:
            c = self.half_arg
            lo, d, up = self._coeffs
            self._factor = TridiagFactor(-c * lo, 1.0 - c * d, -c * up)
        return self._factor

    def apply(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if self._tau == 0.0:
            return v.copy()
        c = self.half_arg
        lo, d, up = self._coeffs
        L = self.op.to_lines(v)
        extra = (slice(None), slice(None)) + (None,) * (L.ndim - 2)
        rhs = L + c * d[extra] * L
        rhs[:, 1:] += c * lo[:, 1:][extra] * L[:, :-1]
        rhs[:, :-1] += c * up[:, :-1][extra] * L[:, 1:]
        return self.op.from_lines(self.factor().solve(rhs))

    __call__ = apply


def pade11_apply(A: LineOperator, tau: float, v: np.ndarray) -> np.ndarray:
    """``(I - tau A / 2)^-1 (I + tau A / 2) v``."""
    return Propagator(A, 1.0, tau).apply(v)


def make_propagators(op: SplitOperator, tau: float = 0.0) -> tuple[Propagator, Propagator]:
    return Propagator(op.Mx, 0.5, tau), Propagator(op.My, 1.0, tau)


def strang_apply(prop_x: Propagator, prop_y: Propagator, v: np.ndarray) -> np.ndarray:
    """``Phi v = Ex Ey Ex v`` where ``prop_x`` carries the half step."""
    if prop_x.tau != prop_y.tau:
        raise ContractViolation(f"propagators disagree on tau: {prop_x.tau!r} vs {prop_y.tau!r}")
    return prop_x.apply(prop_y.apply(prop_x.apply(v)))


def phi_minus_identity_weighted(op: SplitOperator, props, F: np.ndarray) -> np.ndarray:
    """``M^-1 (Phi - I) F``."""
    F = np.asarray(F, dtype=float)
    return op.solve(strang_apply(*props, F) - F)

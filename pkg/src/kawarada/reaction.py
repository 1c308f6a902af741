"""Stochastic Kawarada reaction ``g(eps, u) = phi(eps) / (sigma (1 - u))``.

Any object with ``g(v, t)`` and ``jacobian_diag(v, t)`` can stand in for
:class:`ReactionField`. Alternative reactions must keep ``f(eps, 0) > 0``,
``f_u > 0``, blow up as ``u -> 1`` and have a divergent integral on [0, 1);
the positivity and monotonicity monitors rely on these.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Protocol

import numpy as np

from .errors import ConfigError, DomainViolation, QuenchReached

PHI_KINDS = ("one", "eps")


class Reaction(Protocol):
    def g(self, v: np.ndarray, t: float = 0.0) -> np.ndarray: ...

    def jacobian_diag(self, v: np.ndarray, t: float = 0.0) -> np.ndarray: ...


def sample_eps(seed: int, lo: float, hi: float, n: int) -> np.ndarray:
    """``n`` i.i.d. uniform samples on [lo, hi]."""
    if lo > hi:
        raise ConfigError(f"eps bounds reversed: lo={lo} > hi={hi}")
    return np.random.default_rng(seed).uniform(lo, hi, n)


def _check(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    hit = np.flatnonzero(v >= 1.0)
    if hit.size:
        k = int(hit[np.argmax(v[hit])])
        raise QuenchReached(k, float(v[k]))
    neg = np.flatnonzero(v < 0.0)
    if neg.size:
        k = int(neg[0])
        raise DomainViolation(f"negative solution value v[{k}]={v[k]!r}")
    return v


@dataclass(frozen=True)
class ReactionField:
    eps: np.ndarray
    sigma: np.ndarray
    phi_kind: str = "eps"
    seed: int | None = None

    def __post_init__(self):
        if self.phi_kind not in PHI_KINDS:
            raise ConfigError(f"phi must be one of {PHI_KINDS}, got {self.phi_kind!r}")
        eps = np.array(self.eps, dtype=float).ravel()
        sigma = np.array(self.sigma, dtype=float).ravel()
        if eps.shape != sigma.shape:
            raise ConfigError(f"eps ({eps.size}) and sigma ({sigma.size}) sizes differ")
        for a in (eps, sigma):
            a.setflags(write=False)
        object.__setattr__(self, "eps", eps)
        object.__setattr__(self, "sigma", sigma)
        weight = self.phi / sigma
        weight.setflags(write=False)
        object.__setattr__(self, "_weight", weight)

    @classmethod
    def sampled(cls, sigma, seed: int, lo: float = 0.98, hi: float = 1.02, phi_kind: str = "eps") -> "ReactionField":
        sigma = np.asarray(sigma, dtype=float).ravel()
        return cls(sample_eps(seed, lo, hi, sigma.size), sigma, phi_kind, seed)

    @property
    def phi(self) -> np.ndarray:
        return self.eps.copy() if self.phi_kind == "eps" else np.ones_like(self.eps)

    def g(self, v: np.ndarray, t: float = 0.0) -> np.ndarray:
        return self._weight / (1.0 - _check(v))

    def jacobian_diag(self, v: np.ndarray, t: float = 0.0) -> np.ndarray:
        return self._weight / (1.0 - _check(v)) ** 2

    def restrict(self, idx: np.ndarray) -> "ReactionField":
        return ReactionField(self.eps[idx], self.sigma[idx], self.phi_kind, self.seed)


def eval_g(field: ReactionField, v: np.ndarray) -> np.ndarray:
    return field.g(v)


def eval_g_jacobian_diag(field: ReactionField, v: np.ndarray) -> np.ndarray:
    return field.jacobian_diag(v)


@dataclass(frozen=True)
class ForcedReaction:
    """``g(v) + source(t)``: a base reaction plus a time-dependent nodal source."""

    base: ReactionField
    source: Callable[[float], np.ndarray]

    def g(self, v: np.ndarray, t: float = 0.0) -> np.ndarray:
        return self.base.g(v, t) + self.source(t)

    def jacobian_diag(self, v: np.ndarray, t: float = 0.0) -> np.ndarray:
        return self.base.jacobian_diag(v, t)

"""Coefficient fields, initial data and manufactured solutions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .grid import Mesh2D
from .reaction import ForcedReaction, ReactionField

SIGMA_KINDS = ("one", "constant", "example2")
U0_KINDS = ("cosine", "zero")


def sigma_values(mesh: Mesh2D, kind: str = "one", value: float = 1.0) -> np.ndarray:
    X, Y = mesh.coordinates()
    if kind == "one":
        return np.ones_like(X)
    if kind == "constant":
        return np.full_like(X, float(value))
    if kind == "example2":
        # vanishes only at the corner (-1, -1), which is never an interior node
        return np.sqrt((X + 1.0) ** 2 + (Y + 1.0) ** 2)
    raise ConfigError(f"unknown sigma kind {kind!r}; expected one of {SIGMA_KINDS}")


def initial_values(mesh: Mesh2D, kind: str = "cosine", amplitude: float = 0.001) -> np.ndarray:
    X, Y = mesh.coordinates()
    if kind == "cosine":
        return amplitude * (1.0 - np.cos(2 * np.pi * X)) * (1.0 - np.cos(2 * np.pi * Y))
    if kind == "zero":
        return np.zeros_like(X)
    raise ConfigError(f"unknown u0 kind {kind!r}; expected one of {U0_KINDS}")


@dataclass(frozen=True)
class ManufacturedSolution:
    """``u*(x, y, t) = (1 - exp(-t)) * s_max * P(x, y)`` with ``P = 0`` on the boundary.

    ``quadratic``: P = (1 - x^2)(1 - y^2) / 2, reproduced exactly by the
    three-point differences, so only time-stepping error remains.
    ``cosine``: P = cos(pi x / 2) cos(pi y / 2), which also carries spatial error.
    """

    kind: str = "quadratic"
    s_max: float = 0.5

    def __post_init__(self):
        if self.kind not in ("quadratic", "cosine"):
            raise ConfigError(f"unknown manufactured solution {self.kind!r}")
        if not 0.0 < self.s_max < 1.0:
            raise ConfigError("s_max must lie in (0, 1)")

    def profile(self, X, Y):
        if self.kind == "quadratic":
            P = 0.5 * (1 - X**2) * (1 - Y**2)
            return P, -(1 - Y**2), -(1 - X**2)
        q = 0.5 * np.pi
        P = np.cos(q * X) * np.cos(q * Y)
        return P, -q * q * P, -q * q * P

    def exact(self, mesh: Mesh2D, t: float) -> np.ndarray:
        X, Y = mesh.coordinates()
        return (1.0 - np.exp(-t)) * self.s_max * self.profile(X, Y)[0]

    def reaction(self, mesh: Mesh2D, base: ReactionField) -> ForcedReaction:
        """``base`` plus the source that makes ``u*`` an exact solution of the PDE."""
        X, Y = mesh.coordinates()
        P, Pxx, Pyy = self.profile(X, Y)
        lap = (Pxx / mesh.a**2 + Pyy / mesh.b**2) / base.sigma
        s = self.s_max

        def source(t: float) -> np.ndarray:
            growth = 1.0 - np.exp(-t)
            u = growth * s * P
            return np.exp(-t) * s * P - growth * s * lap - base.g(u, t)

        return ForcedReaction(base, source)


def manufactured_factory(mesh: Mesh2D, solution: ManufacturedSolution, params, sigma_kind: str = "one"):
    """``level -> solver`` for a rate study on a problem with known solution ``u*``.

    ``u*(0) = 0`` so every run starts from zero; the base reaction is ``1 / (sigma (1 - u))``.
    """
    from .stepper import KawaradaSolver

    meshes = [mesh, mesh.refine_halve()]
    meshes.append(meshes[1].refine_halve())

    def factory(level: int):
        m = meshes[level]
        sig = sigma_values(m, sigma_kind)
        base = ReactionField(np.ones(m.size), sig, "one")
        return KawaradaSolver(m, sig, solution.reaction(m, base), solution.exact(m, params.t0), params)

    return factory

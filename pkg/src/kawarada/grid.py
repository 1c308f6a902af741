"""Nonuniform tensor-product meshes on (-1, 1) x (-1, 1).

A one-dimensional mesh is the image of the uniform computational grid
``omega_i = -1 + i * 2 / (N + 1)`` under a strictly increasing map ``g`` with
``g(-1) = -1`` and ``g(1) = 1``. Three map families are provided:

``uniform``    g(w) = w
``sine``       g(w) = sin(pi w / 2)
``clustered``  g(w) = m(w + s sin(pi w) / pi), |s| < 1, with the optional
               recentring m(z) = (z + c) / (1 + c z) moving the image of
               w = 0 to ``center``. ``s < 0`` concentrates nodes around it.

Meshes are immutable; :func:`refine_halve` returns a new mesh.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import MeshError

MAPPING_KINDS = ("uniform", "sine", "clustered")


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class MeshMapping:
    kind: str = "uniform"
    s: float = 0.0
    center: float = 0.0

    def __post_init__(self):
        if self.kind not in MAPPING_KINDS:
            raise MeshError(f"unknown mapping kind {self.kind!r}; expected one of {MAPPING_KINDS}")
        if self.kind == "clustered":
            if not abs(self.s) < 1.0:
                raise MeshError(f"clustered mapping needs |s| < 1, got s={self.s}")
            if not abs(self.center) < 1.0:
                raise MeshError(f"clustered mapping needs |center| < 1, got center={self.center}")

    def __call__(self, w):
        w = np.asarray(w, dtype=float)
        if self.kind == "uniform":
            return w.copy()
        if self.kind == "sine":
            return np.sin(0.5 * np.pi * w)
        z = w + self.s * np.sin(np.pi * w) / np.pi
        c = self.center
        if c == 0.0:
            return z
        return (z + c) / (1.0 + c * z)


@dataclass(frozen=True)
class Mesh1D:
    """Nodes ``x_0 = -1 < x_1 < ... < x_{N+1} = 1`` and steps ``h_i = x_{i+1} - x_i``."""

    nodes: np.ndarray
    steps: np.ndarray = field(default=None)
    mapping: MeshMapping | None = None

    def __post_init__(self):
        nodes = _frozen(self.nodes)
        if nodes.ndim != 1 or nodes.size < 3:
            raise MeshError("a mesh needs at least one interior node")
        if self.steps is None:
            steps = _frozen(np.diff(nodes))
        else:
            steps = _frozen(self.steps)
            if steps.shape != (nodes.size - 1,):
                raise MeshError("steps must have one entry per segment")
        bad = np.flatnonzero(~(np.diff(nodes) > 0.0))
        if bad.size:
            i = int(bad[0])
            raise MeshError(
                f"mesh nodes not strictly increasing: x[{i}]={nodes[i]!r} >= x[{i + 1}]={nodes[i + 1]!r}"
            )
        if abs(nodes[0] + 1.0) > 1e-12 or abs(nodes[-1] - 1.0) > 1e-12:
            raise MeshError(f"mesh must span [-1, 1], got [{nodes[0]!r}, {nodes[-1]!r}]")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "steps", steps)

    @classmethod
    def from_nodes(cls, nodes) -> "Mesh1D":
        return cls(np.asarray(nodes, dtype=float))

    @property
    def n_interior(self) -> int:
        return self.nodes.size - 2

    @property
    def interior(self) -> np.ndarray:
        return self.nodes[1:-1]

    @property
    def step_products(self) -> np.ndarray:
        """``h_{i-1} h_i`` for interior nodes ``i = 1..N``."""
        return self.steps[:-1] * self.steps[1:]


def build_mesh(n: int, mapping: MeshMapping | None = None) -> Mesh1D:
    """Image of the uniform grid with ``n`` interior nodes under ``mapping``."""
    if int(n) != n or n < 1:
        raise MeshError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    mapping = mapping or MeshMapping()
    k = 2.0 / (n + 1)
    w = -1.0 + k * np.arange(n + 2)
    w[-1] = 1.0
    if mapping.kind == "uniform":
        return Mesh1D(w, np.full(n + 1, k), mapping)
    x = mapping(w)
    x[0], x[-1] = -1.0, 1.0
    return Mesh1D(x, None, mapping)


def refine_halve(m: Mesh1D) -> Mesh1D:
    """Split every segment at its midpoint; parent nodes are kept bit-for-bit."""
    half = 0.5 * m.steps
    nodes = np.empty(2 * m.nodes.size - 1)
    nodes[0::2] = m.nodes
    nodes[1::2] = m.nodes[:-1] + half
    return Mesh1D(nodes, np.repeat(half, 2), m.mapping)


@dataclass(frozen=True)
class Mesh2D:
    mx: Mesh1D
    my: Mesh1D
    a: float = 1.0
    b: float = 1.0

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise MeshError(f"domain half-widths must be positive, got a={self.a}, b={self.b}")

    @property
    def nx(self) -> int:
        return self.mx.n_interior

    @property
    def ny(self) -> int:
        return self.my.n_interior

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @property
    def shape(self) -> tuple[int, int]:
        """Shape of a solution vector reshaped to (row j, column i)."""
        return (self.ny, self.nx)

    @property
    def h_min(self) -> float:
        return float(min(self.mx.step_products.min(), self.my.step_products.min()))

    def index(self, i: int, j: int) -> int:
        """Lexicographic position of interior node (i, j), both 1-based."""
        if not (1 <= i <= self.nx and 1 <= j <= self.ny):
            raise IndexError(f"node ({i}, {j}) outside the interior grid {self.nx}x{self.ny}")
        return (j - 1) * self.nx + i - 1

    def node_of(self, k: int) -> tuple[int, int]:
        j, i = divmod(int(k), self.nx)
        return i + 1, j + 1

    def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        """Interior node coordinates as flat arrays in lexicographic order."""
        X, Y = np.meshgrid(self.mx.interior, self.my.interior)
        return X.ravel(), Y.ravel()

    def refine_halve(self) -> "Mesh2D":
        return Mesh2D(refine_halve(self.mx), refine_halve(self.my), self.a, self.b)

    def coarse_indices(self, levels: int = 1) -> np.ndarray:
        """Positions, in this mesh's vectors, of the nodes of the mesh ``levels`` halvings coarser."""
        stride = 2**levels
        ii = np.arange(stride - 1, self.nx, stride)
        jj = np.arange(stride - 1, self.ny, stride)
        return (jj[:, None] * self.nx + ii[None, :]).ravel()


def build_mesh2d(nx: int, ny: int, mapping: MeshMapping | None = None,
                 mapping_y: MeshMapping | None = None, a: float = 1.0, b: float = 1.0) -> Mesh2D:
    mapping = mapping or MeshMapping()
    return Mesh2D(build_mesh(nx, mapping), build_mesh(ny, mapping_y or mapping), a, b)


def _c_alpha(m: Mesh1D) -> float:
    h = m.steps
    n = m.n_interior
    if n < 2:
        raise MeshError("c(h) needs at least two interior nodes per direction")
    prev = h[:-1]                      # h_{i-1}, i = 1..N
    cur = h[1:]                        # h_i
    nxt = np.append(h[2:], h[-1])      # h_{i+1}, with h_{N+1} := h_N
    partial = np.cumsum(cur)           # sum_{j=1}^{i} h_j
    terms = (cur * (2.0 + cur) / (prev * (prev + cur))
             + nxt * (nxt - 2.0) / (cur * (prev + cur))
             + 2.0 * (nxt - cur) * partial)
    return float(terms.min())


def compute_kh(m: Mesh2D) -> float:
    """Mesh functional ``k(h) = (c_x / a^2 + c_y / b^2) / 4``."""
    return (_c_alpha(m.mx) / m.a**2 + _c_alpha(m.my) / m.b**2) / 4.0


def max_step(m: Mesh1D) -> float:
    return float(m.steps.max())


def step_jump(m: Mesh1D) -> float:
    """``max_i |h_{i-1} - h_i|``; O(h^2) on smooth-mapped meshes."""
    return float(np.abs(np.diff(m.steps)).max()) if m.steps.size > 1 else 0.0


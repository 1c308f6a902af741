"""Flat ``key = value`` run configuration and problem construction.

A config file has no sections; ``#`` and ``;`` start comments. Unknown keys
are rejected so that a typo cannot silently fall back to a default.
"""

from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, fields, replace
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import ConfigError, KawaradaError
from .grid import MAPPING_KINDS, Mesh2D, MeshMapping, build_mesh2d
from .problems import SIGMA_KINDS, U0_KINDS, initial_values, sigma_values
from .reaction import PHI_KINDS, ReactionField, sample_eps
from .stepper import KawaradaSolver, SchemeParams

MODES = ("run", "rate_study")
_SECTION = "run"


@dataclass(frozen=True)
class RunConfig:
    nx: int = 63
    ny: int = 63
    mapping: str = "clustered"
    stretch: float = -0.5
    center: float = 0.0
    a: float = 2.0
    b: float = 2.0
    sigma: str = "one"
    sigma_value: float = 1.0
    phi: str = "one"
    eps_lo: float = 0.98
    eps_hi: float = 1.02
    u0: str = "cosine"
    u0_amplitude: float = 0.001
    theta: float = 0.5
    tau0: float = 1e-3
    eps0: float = 0.90
    t0: float = 0.0
    t_max: float = 10.0
    quench_threshold: float = 1.0
    mode: str = "run"
    sample_times: tuple[float, ...] = ()
    study_nx: int = 31
    study_ny: int = 31
    seed: int = 0

    def __post_init__(self):
        checks = [
            (self.nx >= 1 and self.ny >= 1, f"nx, ny must be >= 1, got {self.nx}, {self.ny}"),
            (self.study_nx >= 1 and self.study_ny >= 1, "study_nx, study_ny must be >= 1"),
            (self.a > 0 and self.b > 0, f"a, b must be positive, got {self.a}, {self.b}"),
            (self.mapping in MAPPING_KINDS, f"mapping must be one of {MAPPING_KINDS}"),
            (self.sigma in SIGMA_KINDS, f"sigma must be one of {SIGMA_KINDS}"),
            (self.phi in PHI_KINDS, f"phi must be one of {PHI_KINDS}"),
            (self.u0 in U0_KINDS, f"u0 must be one of {U0_KINDS}"),
            (self.mode in MODES, f"mode must be one of {MODES}"),
            (self.eps_lo <= self.eps_hi, f"eps_lo={self.eps_lo} exceeds eps_hi={self.eps_hi}"),
            (self.sigma != "constant" or self.sigma_value > 0, "sigma_value must be positive"),
            (all(np.diff(self.sample_times) > 0), "sample_times must be strictly increasing"),
            (all(t > self.t0 for t in self.sample_times), "sample_times must exceed t0"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        if self.mode == "rate_study" and not self.sample_times:
            raise ConfigError("rate_study mode needs sample_times")
        self.scheme()

    def scheme(self) -> SchemeParams:
        return SchemeParams(theta=self.theta, tau0=self.tau0, eps0=self.eps0, t0=self.t0,
                            t_max=self.t_max, quench_threshold=self.quench_threshold)

    def mesh_mapping(self) -> MeshMapping:
        try:
            return MeshMapping(self.mapping, s=self.stretch, center=self.center)
        except KawaradaError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sample_times"] = list(self.sample_times)
        return d

    def with_overrides(self, **kw) -> "RunConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw) if kw else self


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _convert(key: str, raw: str):
    kind = _TYPES[key]
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "str":
            return raw.strip()
        return tuple(float(x) for x in raw.replace(",", " ").split())
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc


def parse_config(text: str) -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    try:
        cp.read_string(f"[{_SECTION}]\n{text}")
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}".splitlines()[0]) from exc
    extra = [sec for sec in cp.sections() if sec != _SECTION]
    if extra:
        raise ConfigError(f"config files have no sections, found [{extra[0]}]")
    values = {}
    for key, raw in cp[_SECTION].items():
        if key not in _TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = _convert(key, raw)
    return RunConfig(**values)


def preset_path(name: str) -> Path | None:
    res = resources.files("kawarada") / "presets" / Path(name).name
    return Path(str(res)) if res.is_file() else None


def load_config(path: str | Path) -> RunConfig:
    """Read a config file; bare preset names such as ``example1.cfg`` also resolve."""
    p = Path(path)
    if not p.is_file():
        p = preset_path(str(path)) or p
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {str(path)!r}: {exc.strerror}") from exc
    return parse_config(text)


# ---------------------------------------------------------------- problems


def make_mesh(cfg: RunConfig, nx: int | None = None, ny: int | None = None) -> Mesh2D:
    mapping = cfg.mesh_mapping()
    return build_mesh2d(nx or cfg.nx, ny or cfg.ny, mapping, a=cfg.a, b=cfg.b)


def make_solver(cfg: RunConfig, mesh: Mesh2D | None = None, eps: np.ndarray | None = None) -> KawaradaSolver:
    """Solver for one run; ``eps`` defaults to a fresh sample on ``mesh`` from ``cfg.seed``."""
    mesh = mesh or make_mesh(cfg)
    sig = sigma_values(mesh, cfg.sigma, cfg.sigma_value)
    if eps is None:
        eps = sample_eps(cfg.seed, cfg.eps_lo, cfg.eps_hi, mesh.size)
    reaction = ReactionField(eps, sig, cfg.phi, cfg.seed)
    v0 = initial_values(mesh, cfg.u0, cfg.u0_amplitude)
    return KawaradaSolver(mesh, sig, reaction, v0, cfg.scheme())


def study_factory(cfg: RunConfig) -> Callable[[int], KawaradaSolver]:
    """``level -> solver`` on the study mesh refined ``level`` times.

    The stochastic field is drawn once on the finest mesh and restricted to
    the coarser ones, so every level sees the same realisation at shared nodes.
    """
    coarse = make_mesh(cfg, cfg.study_nx, cfg.study_ny)
    meshes = [coarse, coarse.refine_halve()]
    meshes.append(meshes[1].refine_halve())
    eps = sample_eps(cfg.seed, cfg.eps_lo, cfg.eps_hi, meshes[2].size)

    def factory(level: int) -> KawaradaSolver:
        idx = meshes[2].coarse_indices(2 - level) if level < 2 else slice(None)
        return make_solver(cfg, meshes[level], eps[idx])

    return factory

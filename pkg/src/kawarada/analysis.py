"""Observed convergence rates from three nested runs (Milne device).

For fields ``u_c, u_m, u_f`` computed with steps ``h, h/2, h/4`` (or
``tau, tau/2, tau/4``) and compared on the coarse nodes, the observed order is

    p = log2(|u_c - u_m| / |u_m - u_f|)

node by node, and the same ratio of 2-norms for the spectral estimate.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ContractViolation, EmptyRate, KawaradaError, StudyAborted
from .expm import make_propagators, strang_apply
from .grid import Mesh2D
from .operators import assemble
from .stepper import KawaradaSolver, RunReport, subdivide

log = logging.getLogger(__name__)

MASK_FLOOR = 1e-14
AXES = ("space", "time")
FIELDS = ("u", "ut")


@dataclass(frozen=True)
class RefinementTriple:
    """Three snapshots at one time, already restricted to the coarse nodes."""

    coarse: np.ndarray
    mid: np.ndarray
    fine: np.ndarray
    axis: str = "space"
    t: float | None = None

    def __post_init__(self):
        if self.axis not in AXES:
            raise ContractViolation(f"axis must be one of {AXES}, got {self.axis!r}")
        arrs = [np.asarray(a, dtype=float).ravel() for a in (self.coarse, self.mid, self.fine)]
        if len({a.size for a in arrs}) != 1:
            raise ContractViolation(f"snapshot sizes differ: {[a.size for a in arrs]}")
        for name, a in zip(("coarse", "mid", "fine"), arrs):
            object.__setattr__(self, name, a)

    @property
    def differences(self) -> tuple[np.ndarray, np.ndarray]:
        return self.coarse - self.mid, self.mid - self.fine


@dataclass(frozen=True)
class RateSurface:
    """Per-node rates with ``nan`` at masked nodes."""

    values: np.ndarray
    spectral: float | None = None
    axis: str = "space"
    t: float | None = None

    @property
    def mask(self) -> np.ndarray:
        return np.isnan(self.values)

    @property
    def mask_fraction(self) -> float:
        return float(self.mask.mean())

    @property
    def summary(self) -> dict:
        p = self.values[~self.mask]
        return {
            "max": float(p.max()),
            "min": float(p.min()),
            "median": float(np.median(p)),
            "mean": float(p.mean()),
        }

    def to_dict(self) -> dict:
        out = dict(self.summary)
        out["spectral"] = self.spectral
        out["mask_fraction"] = self.mask_fraction
        return out


def milne_pointwise(triple: RefinementTriple, floor: float = MASK_FLOOR) -> RateSurface:
    d1, d2 = (np.abs(d) for d in triple.differences)
    keep = (d1 >= floor) & (d2 >= floor)
    if not keep.any():
        raise EmptyRate(f"all {d1.size} nodes masked: differences below {floor:g}")
    p = np.full(d1.shape, np.nan)
    p[keep] = np.log2(d1[keep] / d2[keep])
    try:
        spectral = milne_spectral(triple, floor)
    except EmptyRate:
        spectral = None
    return RateSurface(p, spectral, triple.axis, triple.t)


def milne_spectral(triple: RefinementTriple, floor: float = MASK_FLOOR) -> float:
    n1, n2 = (float(np.linalg.norm(d)) for d in triple.differences)
    if n2 < floor or n1 < floor:
        raise EmptyRate(f"difference norms {n1:.3e}, {n2:.3e} below {floor:g}")
    return float(np.log2(n1 / n2))


# ---------------------------------------------------------------- rate study

SolverFactory = Callable[[int], KawaradaSolver]

RUN_IDS = {("space", 1): "h/2", ("space", 2): "h/4", ("time", 2): "tau/2", ("time", 4): "tau/4"}


@dataclass
class StudyReport:
    sample_times: list[float]
    coords: tuple[np.ndarray, np.ndarray]
    surfaces: dict[tuple[float, str, str], RateSurface]
    runs: dict[str, dict] = field(default_factory=dict)
    # coarse-run (u, ut) at each sampling time
    fields: dict[float, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)

    def surface(self, t: float, axis: str = "space", name: str = "u") -> RateSurface:
        return self.surfaces[(t, axis, name)]

    def mean_rate(self, axis: str = "space", name: str = "u") -> list[float]:
        return [self.surface(t, axis, name).summary["mean"] for t in self.sample_times]

    def to_dict(self) -> dict:
        def block(name):
            return {axis: [self.surface(t, axis, name).to_dict() for t in self.sample_times] for axis in AXES}

        return {
            "sample_times": list(self.sample_times),
            "rates": block("u"),
            "rates_ut": block("ut"),
            "mask_fraction": {
                axis: [self.surface(t, axis, "u").mask_fraction for t in self.sample_times] for axis in AXES
            },
            "runs": self.runs,
        }


def _run_summary(rep: RunReport) -> dict:
    return {
        "status": rep.status,
        "t": rep.t,
        "steps": rep.k,
        "retries": rep.retries,
        "clip_events": rep.clip_events,
    }


def _checked(run_id: str, rep: RunReport, times: Sequence[float]) -> RunReport:
    missing = [t for t in times if t not in rep.snapshots]
    if missing:
        raise StudyAborted(run_id, f"run {run_id} ended ({rep.status}) at t={rep.t!r} before sampling time {missing[0]!r}")
    return rep


def _guarded_run(run_id: str, solver: KawaradaSolver, times, **kw) -> RunReport:
    try:
        rep = solver.run(sample_times=times, **kw)
    except KawaradaError as exc:
        raise StudyAborted(run_id, f"run {run_id} failed: {exc}") from exc
    return _checked(run_id, rep, times)


def rate_study(factory: SolverFactory, sample_times: Sequence[float]) -> StudyReport:
    """Spatial and temporal rates at each sampling time.

    ``factory(level)`` returns a fresh solver on the coarse mesh refined
    ``level`` times. The coarse run's step times become the schedule for every
    other run: replayed as is on the finer meshes, split into 2 and 4 equal
    parts on the coarse mesh.
    """
    times = sorted(float(t) for t in sample_times)
    if not times:
        raise ContractViolation("rate study needs at least one sampling time")
    base = factory(0)
    mesh: Mesh2D = base.mesh
    coarse = _guarded_run("h", base, times, stop_after_samples=True)
    schedule = coarse.step_times
    t0 = base.params.t0

    runs = {"h": coarse}
    for lev in (1, 2):
        rid = RUN_IDS[("space", lev)]
        runs[rid] = _guarded_run(rid, factory(lev), times, schedule=schedule)
    for f in (2, 4):
        rid = RUN_IDS[("time", f)]
        runs[rid] = _guarded_run(rid, factory(0), times, schedule=subdivide(schedule, t0, f))

    idx = {}
    fine_mesh = mesh
    for lev in (1, 2):
        fine_mesh = fine_mesh.refine_halve()
        idx[lev] = fine_mesh.coarse_indices(lev)

    surfaces = {}
    for t in times:
        for slot, name in enumerate(FIELDS):
            sp_fields = [runs["h"].snapshots[t][slot],
                         runs["h/2"].snapshots[t][slot][idx[1]],
                         runs["h/4"].snapshots[t][slot][idx[2]]]
            tm_fields = [runs[r].snapshots[t][slot] for r in ("h", "tau/2", "tau/4")]
            surfaces[(t, "space", name)] = milne_pointwise(RefinementTriple(*sp_fields, "space", t))
            surfaces[(t, "time", name)] = milne_pointwise(RefinementTriple(*tm_fields, "time", t))
    return StudyReport(times, mesh.coordinates(), surfaces, {k: _run_summary(r) for k, r in runs.items()},
                       dict(coarse.snapshots))


# ---------------------------------------------------------------- stability


def frozen_norm_ratios(mesh: Mesh2D, sigma, v0: np.ndarray, tau: float, steps: int) -> np.ndarray:
    """``||Phi^k v0||_2 / ||v0||_2`` for k = 1..steps with the reaction switched off."""
    props = make_propagators(assemble(mesh, sigma), tau)
    v = np.asarray(v0, dtype=float).copy()
    n0 = np.linalg.norm(v)
    out = np.empty(steps)
    for k in range(steps):
        v = strang_apply(*props, v)
        out[k] = np.linalg.norm(v) / n0
    return out


@dataclass(frozen=True)
class PerturbationResult:
    constant: float
    t_q: float
    t_end: float
    steps: int
    ratios: np.ndarray

    def to_dict(self) -> dict:
        return {"constant": self.constant, "t_q": self.t_q, "t_end": self.t_end, "steps": self.steps}


def perturbation_constant(factory: Callable[[], KawaradaSolver], delta: float = 1e-8, fraction: float = 0.99,
                          seed: int = 0) -> PerturbationResult:
    """Largest ``||z_k||_2 / ||z_0||_2`` for two runs started ``delta`` apart, up to ``fraction * T_q``.

    The perturbed run replays the reference run's step sizes exactly.
    """
    ref = factory()
    full = ref.run(record_steps=False)
    if full.quench is None:
        raise ContractViolation(f"reference run ended with status {full.status!r}, no quench time")
    t_q = full.quench.t_q
    t_end = fraction * t_q
    a = factory()
    b = factory()
    z0 = np.abs(np.random.default_rng(seed).standard_normal(a.v0.size))
    z0 *= delta / np.linalg.norm(z0)
    b.v0 = b.v0 + z0
    sa, sb = a.initial_state(), b.initial_state()
    ratios = []
    while sa.t < t_end:
        tau = min(a.adapt_tau(sa), a.tau_cap, t_end - sa.t)
        sa, ra = a.step(sa, tau)
        sb, rb = b.step(sb, ra.tau)
        if rb.tau != ra.tau:
            raise ContractViolation(f"lockstep lost at t={sa.t!r}: tau {ra.tau!r} vs {rb.tau!r}")
        ratios.append(np.linalg.norm(sb.v - sa.v) / delta)
    ratios = np.asarray(ratios)
    return PerturbationResult(float(ratios.max()), float(t_q), float(sa.t), ratios.size, ratios)

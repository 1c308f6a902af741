"""Time integration of ``v' = M v + g(eps, v)`` up to quenching.

One step of size ``tau`` from ``v_k``::

    w     = v_k + tau (M v_k + g(v_k))                      (explicit predictor)
    F     = theta g(v_k) + (1 - theta) g(w)
    v_k+1 = Phi v_k + M^-1 (Phi - I) F

with ``Phi`` the Strang product of Pade propagators. A candidate that is not
positive or not monotone is rejected and retried with ``tau / 2``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    ConfigError,
    DiagnosticTimeStepUnderflow,
    MonitorViolation,
    QuenchReached,
)
from .expm import make_propagators, strang_apply
from .grid import Mesh2D
from .operators import SplitOperator, assemble

log = logging.getLogger(__name__)

_LANDING = 1e-9


@dataclass(frozen=True)
class SchemeParams:
    theta: float = 0.5
    tau0: float = 1e-3
    eps0: float = 0.90
    quench_threshold: float = 1.0
    t_max: float = 10.0
    t0: float = 0.0
    tau_min: float = 1e-12
    max_retries: int = 8
    monotone_tol: float = 1e-12
    clip_margin: float = 1e-12
    enforce_monitors: bool = True
    positivity_cap: bool = True
    enforce_premise: bool = False

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise ConfigError(f"theta must lie in [0, 1], got {self.theta}")
        if not self.tau0 > 0.0:
            raise ConfigError(f"tau0 must be positive, got {self.tau0}")
        if not 0.0 < self.eps0 < 1.0:
            raise ConfigError(f"eps0 must lie in (0, 1), got {self.eps0}")
        if not self.t_max > self.t0:
            raise ConfigError(f"t_max ({self.t_max}) must exceed t0 ({self.t0})")
        if not self.quench_threshold > 0.0:
            raise ConfigError("quench_threshold must be positive")


@dataclass
class State:
    v: np.ndarray
    t: float
    tau: float
    k: int
    ut: np.ndarray


@dataclass(frozen=True)
class QuenchEvent:
    t_q: float
    index: int
    node: tuple[int, int]
    location: tuple[float, float]
    peak_ut: float
    value: float

    def to_dict(self) -> dict:
        return {
            "t_q": self.t_q,
            "index": self.index,
            "node": list(self.node),
            "location": list(self.location),
            "peak_ut": self.peak_ut,
            "value": self.value,
        }


@dataclass(frozen=True)
class StepRecord:
    k: int
    t: float
    tau: float
    max_v: float
    max_ut: float
    positive: bool
    monotone: bool
    premise: bool
    retries: int
    clipped: bool

    FIELDS = ("k", "t", "tau", "max_v", "max_ut", "positive", "monotone", "premise", "retries", "clipped")


@dataclass
class RunReport:
    status: str
    t: float
    k: int
    v: np.ndarray
    ut: np.ndarray
    quench: QuenchEvent | None = None
    steps: list[StepRecord] = field(default_factory=list)
    snapshots: dict[float, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)
    premise_at_start: bool = True
    clip_events: int = 0
    retries: int = 0
    diagnostics: dict = field(default_factory=dict)

    @property
    def step_sizes(self) -> np.ndarray:
        return np.array([s.tau for s in self.steps])

    @property
    def step_times(self) -> np.ndarray:
        return np.array([s.t for s in self.steps])

    def monitors(self) -> dict:
        return {
            "positivity": all(s.positive for s in self.steps),
            "monotonicity": all(s.monotone for s in self.steps),
            "premise": all(s.premise for s in self.steps),
            "premise_at_start": self.premise_at_start,
        }


class KawaradaSolver:
    """Owns the operators, propagators and reaction of one run.

    ``reaction`` is any object exposing ``g(v, t)``; ``sigma`` is a
    :class:`DegeneracyMatrix` or nodal values.
    """

    def __init__(self, mesh: Mesh2D, sigma, reaction, v0, params: SchemeParams | None = None,
                 op: SplitOperator | None = None):
        self.mesh = mesh
        self.params = params or SchemeParams()
        self.op = op if op is not None else assemble(mesh, sigma)
        self.props = make_propagators(self.op, self.params.tau0)
        self.reaction = reaction
        self.v0 = np.array(v0, dtype=float).ravel()
        if self.v0.size != mesh.size:
            raise ConfigError(f"initial state has {self.v0.size} values for {mesh.size} nodes")
        self.clip_events = 0
        self.tau_cap = step_bound(self.op) if self.params.positivity_cap else math.inf

    def rhs(self, v: np.ndarray, t: float) -> np.ndarray:
        return self.op.matvec(v) + self.reaction.g(v, t)

    def initial_state(self) -> State:
        p = self.params
        return State(self.v0.copy(), p.t0, p.tau0, 0, self.rhs(self.v0, p.t0))

    def predictor(self, state: State, tau: float) -> tuple[np.ndarray, bool]:
        w = state.v + tau * state.ut
        cap = self.params.quench_threshold - self.params.clip_margin
        # the lower clip only fires when a stiff step overshoots below zero
        clipped = bool(np.any(w > cap) or np.any(w < 0.0))
        if clipped:
            w = np.clip(w, 0.0, cap)
            self.clip_events += 1
            log.debug("predictor clipped at t=%.17g", state.t)
        return w, clipped

    def candidate(self, state: State, tau: float) -> tuple[np.ndarray, bool]:
        """Unmonitored scheme update from ``state`` over ``tau``."""
        theta = self.params.theta
        for prop in self.props:
            prop.set_tau(tau)
        w, clipped = self.predictor(state, tau)
        F = theta * self.reaction.g(state.v, state.t)
        if theta < 1.0:
            F = F + (1.0 - theta) * self.reaction.g(w, state.t + tau)
        both = strang_apply(*self.props, np.column_stack([state.v, F]))
        return both[:, 0] + self.op.solve(both[:, 1] - F), clipped

    def step(self, state: State, tau: float | None = None) -> tuple[State, StepRecord]:
        p = self.params
        tau = state.tau if tau is None else tau
        had_premise = bool(np.all(state.ut > 0.0))
        for retry in range(p.max_retries + 1):
            if tau < p.tau_min:
                raise DiagnosticTimeStepUnderflow(f"tau={tau:.3e} below floor {p.tau_min:.1e} at t={state.t!r}")
            v_new, clipped = self.candidate(state, tau)
            finite = bool(np.all(np.isfinite(v_new)))
            if finite and v_new.max() >= p.quench_threshold:
                k = int(np.argmax(v_new))
                exc = QuenchReached(k, float(v_new[k]))
                exc.t = state.t + tau
                exc.v = v_new
                raise exc
            positive = finite and bool(np.all(v_new > 0.0))
            monotone = finite and bool(np.min(v_new - state.v) >= -p.monotone_tol)
            ut = self.rhs(v_new, state.t + tau) if positive else None
            premise = positive and bool(np.all(ut > 0.0))
            if not p.enforce_monitors and finite:
                break
            # a held premise must survive the step; once lost it is only reported
            if positive and monotone and (premise or not had_premise or not p.enforce_premise):
                break
            log.debug("monitor rejected tau=%.3e at t=%.17g (positive=%s, monotone=%s, premise=%s)",
                      tau, state.t, positive, monotone, premise)
            tau *= 0.5
        else:
            raise MonitorViolation(
                f"positivity/monotonicity still violated after {p.max_retries} halvings at t={state.t!r}"
            )
        t_new = state.t + tau
        if ut is None:
            ut = self.rhs(v_new, t_new)
        new = State(v_new, t_new, tau, state.k + 1, ut)
        rec = StepRecord(new.k, t_new, tau, float(v_new.max()), float(np.abs(ut).max()),
                         positive, monotone, premise, retry, clipped)
        return new, rec

    def adapt_tau(self, state: State) -> float:
        return adapt_tau(state, self.params)

    def _quench_event(self, state: State, exc: QuenchReached) -> QuenchEvent:
        k = int(np.argmax(exc.v))
        i, j = self.mesh.node_of(k)
        loc = (float(self.mesh.mx.nodes[i]), float(self.mesh.my.nodes[j]))
        return QuenchEvent(float(exc.t), k, (i, j), loc, float(np.abs(state.ut).max()), float(exc.v[k]))

    def run(self, sample_times=(), schedule=None, stop_after_samples: bool = False,
            record_steps: bool = True) -> RunReport:
        """Integrate until quench, ``t_max``, or the end of ``schedule``.

        ``schedule`` is an increasing sequence of step end times to replay
        (monitor rejections subdivide a scheduled step, never skip past it).
        Otherwise steps come from :func:`adapt_tau`, truncated to land
        exactly on every sampling time.
        """
        p = self.params
        self.clip_events = 0
        samples = sorted(float(s) for s in sample_times)
        if samples and samples[0] <= p.t0:
            raise ConfigError(f"sampling times must exceed t0={p.t0}")
        state = self.initial_state()
        premise0 = bool(np.all(state.ut > 0.0))
        if not premise0:
            log.warning("M v0 + g(v0) > 0 fails at %d nodes; monotonicity is not guaranteed",
                        int(np.sum(state.ut <= 0.0)))
        report = RunReport("running", state.t, 0, state.v, state.ut, premise_at_start=premise0)
        pending = list(samples)
        if schedule is not None:
            targets = iter(float(x) for x in schedule)
        target = None

        def finish(status):
            report.status = status
            report.t, report.k, report.v, report.ut = state.t, state.k, state.v, state.ut
            report.clip_events = self.clip_events
            return report

        try:
            while True:
                if schedule is not None:
                    if target is None or state.t >= target:
                        target = next(targets, None)
                        if target is None:
                            return finish("completed")
                    goal = target
                    tau = target - state.t
                    landing = True
                    if tau > self.tau_cap:
                        # equal substeps, so the schedule is only ever refined
                        nsub = math.ceil(tau / self.tau_cap * (1.0 - _LANDING))
                        tau = tau / nsub
                        landing = nsub == 1
                else:
                    if state.t >= p.t_max:
                        return finish("t_max")
                    if stop_after_samples and samples and not pending:
                        return finish("completed")
                    tau = min(adapt_tau(state, p), self.tau_cap)
                    goal = pending[0] if pending else p.t_max
                    goal = min(goal, p.t_max)
                    # never leave a sliver step in front of a landing point
                    landing = state.t + tau * (1.0 + _LANDING) >= goal
                    if landing:
                        tau = goal - state.t
                new, rec = self.step(state, tau)
                if landing and rec.tau == tau:
                    new.t = goal
                    rec = replace(rec, t=goal)
                state = new
                report.retries += rec.retries
                if record_steps:
                    report.steps.append(rec)
                while pending and state.t >= pending[0]:
                    if state.t == pending[0]:
                        report.snapshots[pending[0]] = (state.v.copy(), state.ut.copy())
                    pending.pop(0)
        except QuenchReached as exc:
            report.quench = self._quench_event(state, exc)
            return finish("quench")
        except (MonitorViolation, DiagnosticTimeStepUnderflow) as exc:
            exc.report = finish(exc.code)
            raise


def step_bound(op: SplitOperator) -> float:
    """Largest tau for which both Pade numerators ``I + c A`` stay nonnegative.

    ``Ex`` runs over ``tau / 2`` (``c = tau / 4``), ``Ey`` over ``tau`` (``c = tau / 2``).
    """
    dx = float(np.abs(op.Mx.line_coefficients()[1]).max())
    dy = float(np.abs(op.My.line_coefficients()[1]).max())
    return min(4.0 / dx, 2.0 / dy)


def predictor(state: State, solver: KawaradaSolver, tau: float | None = None) -> np.ndarray:
    return solver.predictor(state, state.tau if tau is None else tau)[0]


def step(state: State, solver: KawaradaSolver, tau: float | None = None) -> State:
    return solver.step(state, tau)[0]


def adapt_tau(state: State, params: SchemeParams) -> float:
    """``tau0`` until ``max v`` reaches ``eps0``, then ``tau0 / sqrt(1 + ||u_t||_inf^2)``."""
    if state.v.max() < params.eps0:
        return params.tau0
    tau = params.tau0 / math.sqrt(1.0 + float(np.abs(state.ut).max()) ** 2)
    if tau < params.tau_min:
        raise DiagnosticTimeStepUnderflow(f"adaptive tau={tau:.3e} below floor {params.tau_min:.1e}")
    return tau


def subdivide(times, t0: float, factor: int) -> np.ndarray:
    """Split every step of the schedule ``t0 < times[0] < times[1] ...`` into ``factor`` equal parts."""
    times = np.asarray(times, dtype=float)
    starts = np.concatenate([[t0], times[:-1]])
    frac = np.arange(1, factor + 1) / factor
    out = starts[:, None] + (times - starts)[:, None] * frac[None, :]
    out[:, -1] = times
    return out.ravel()

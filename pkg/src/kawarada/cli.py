"""Command-line front end.

Exit codes: 0 quench found or study completed, 1 run ended without quenching
(t_max, step underflow, aborted study), 2 monitor violation, 3 bad config,
4 output directory not writable.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .analysis import StudyReport, rate_study
from .config import MODES, RunConfig, load_config, make_solver, study_factory
from .errors import ConfigError, DiagnosticTimeStepUnderflow, KawaradaError, MonitorViolation
from .stepper import RunReport, StepRecord

EXIT_OK, EXIT_NO_QUENCH, EXIT_MONITOR, EXIT_CONFIG, EXIT_OUTPUT = 0, 1, 2, 3, 4


class OutputError(KawaradaError):
    code = "output_unwritable"


def _fmt(x: float) -> str:
    return "" if np.isnan(x) else "%.17g" % x


def write_field_csv(path: Path, X: np.ndarray, Y: np.ndarray, values: np.ndarray) -> None:
    """``x,y,value`` rows in lexicographic node order; ``nan`` becomes an empty field."""
    with open(path, "w", newline="") as fh:
        fh.write("x,y,value\n")
        for x, y, v in zip(X, Y, values):
            fh.write(f"{_fmt(x)},{_fmt(y)},{_fmt(v)}\n")


def write_trace_csv(path: Path, steps: list[StepRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(StepRecord.FIELDS)
        for s in steps:
            w.writerow(["%.17g" % v if isinstance(v, float) else int(v) for v in (getattr(s, f) for f in StepRecord.FIELDS)])


def write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2, allow_nan=False)
        fh.write("\n")


def run_payload(cfg: RunConfig, rep: RunReport, tau_cap: float) -> dict:
    return {
        "mode": "run",
        "config": cfg.to_dict(),
        "status": rep.status,
        "t_final": rep.t,
        "steps": rep.k,
        "retries": rep.retries,
        "clip_events": rep.clip_events,
        "tau_cap": tau_cap,
        "monitors": rep.monitors(),
        "quench": rep.quench.to_dict() if rep.quench else None,
        "max_v": float(rep.v.max()),
        "max_ut": float(np.abs(rep.ut).max()),
    }


def emit_surfaces(report, coords, out: Path) -> list[Path]:
    """Write solution/derivative fields and, for a study, the rate surfaces at the last sampling time."""
    X, Y = coords
    written = []
    if isinstance(report, StudyReport):
        t = report.sample_times[-1]
        u, ut = report.fields[t]
        extra = {"p_space.csv": report.surface(t, "space", "u").values,
                 "q_time.csv": report.surface(t, "time", "u").values}
    else:
        u, ut = report.v, report.ut
        extra = {}
    for name, vals in {"solution.csv": u, "ut.csv": ut, **extra}.items():
        write_field_csv(out / name, X, Y, vals)
        written.append(out / name)
    return written


def _prepare_out(out: Path) -> None:
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create {str(out)!r}: {exc.strerror}") from exc
    if not os.access(out, os.W_OK | os.X_OK):
        raise OutputError(f"output directory {str(out)!r} is not writable")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kawarada", description="Quenching runs and convergence-rate studies.")
    ap.add_argument("--config", required=True, help="config file or preset name (example1.cfg, example2.cfg)")
    ap.add_argument("--seed", type=int, help="override the config seed")
    ap.add_argument("--out", default="out", help="output directory (default: ./out)")
    ap.add_argument("--trace", action="store_true", help="write per-step trace.csv")
    ap.add_argument("--mode", choices=MODES, help="override the config mode")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def _fail(code: int, exc: KawaradaError) -> int:
    msg = str(exc).splitlines()[0] if str(exc) else exc.__class__.__name__
    print(f"error {exc.code}: {msg}", file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config).with_overrides(seed=args.seed, mode=args.mode)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, exc)

    out = Path(args.out)
    try:
        _prepare_out(out)
    except OutputError as exc:
        return _fail(EXIT_OUTPUT, exc)

    try:
        if cfg.mode == "run":
            return _run(cfg, out, args.trace)
        return _study(cfg, out)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, exc)
    except OSError as exc:
        return _fail(EXIT_OUTPUT, OutputError(f"write failed: {exc}"))
    except KawaradaError as exc:
        return _fail(EXIT_NO_QUENCH, exc)


def _run(cfg: RunConfig, out: Path, trace: bool) -> int:
    solver = make_solver(cfg)
    code = EXIT_OK
    err = None
    try:
        rep = solver.run()
    except MonitorViolation as exc:
        rep, code, err = exc.report, EXIT_MONITOR, exc
    except DiagnosticTimeStepUnderflow as exc:
        rep, code, err = exc.report, EXIT_NO_QUENCH, exc
    if code == EXIT_OK and rep.status != "quench":
        code = EXIT_NO_QUENCH
    write_json(out / "report.json", run_payload(cfg, rep, solver.tau_cap))
    emit_surfaces(rep, solver.mesh.coordinates(), out)
    if trace:
        write_trace_csv(out / "trace.csv", rep.steps)
    if err is not None:
        return _fail(code, err)
    if code != EXIT_OK:
        print(f"error no_quench: run ended with status {rep.status} at t={rep.t!r}", file=sys.stderr)
    return code


def _study(cfg: RunConfig, out: Path) -> int:
    factory = study_factory(cfg)
    try:
        study = rate_study(factory, cfg.sample_times)
    except KawaradaError as exc:
        cause = exc.__cause__
        return _fail(EXIT_MONITOR if isinstance(cause, MonitorViolation) else EXIT_NO_QUENCH, exc)
    payload = {"mode": "rate_study", "config": cfg.to_dict(), **study.to_dict()}
    write_json(out / "report.json", payload)
    emit_surfaces(study, study.coords, out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

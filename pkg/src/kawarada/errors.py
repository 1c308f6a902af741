"""Exception hierarchy.

Every abnormal end of a run carries a short machine-readable ``code`` so the
CLI can report it on one line.
"""

from __future__ import annotations


class KawaradaError(Exception):
    code = "error"


class MeshError(KawaradaError, ValueError):
    code = "mesh_error"


class AssemblyError(KawaradaError, ValueError):
    code = "assembly_error"


class ConfigError(KawaradaError, ValueError):
    code = "config_error"


class DiagnosticSizeError(KawaradaError):
    """Raised when a dense diagnostic is requested on a grid that is too large."""

    code = "diagnostic_refused"


class ContractViolation(KawaradaError):
    code = "contract_violation"


class DomainViolation(KawaradaError, ValueError):
    """A negative solution value reached the reaction evaluator."""

    code = "domain_violation"


class QuenchReached(KawaradaError):
    """Signal (not a failure): some component reached the quench threshold."""

    code = "quench"

    def __init__(self, index: int, value: float):
        super().__init__(f"quench threshold reached at index {index} (v={value!r})")
        self.index = index
        self.value = value


class MonitorViolation(KawaradaError):
    code = "monitor_violation"


class DiagnosticTimeStepUnderflow(KawaradaError):
    code = "tau_underflow"


class EmptyRate(KawaradaError):
    """Every node of a refinement triple was indeterminate."""

    code = "empty_rate"


class StudyAborted(KawaradaError):
    code = "study_aborted"

    def __init__(self, run_id: str, message: str):
        super().__init__(f"{run_id}: {message}")
        self.run_id = run_id

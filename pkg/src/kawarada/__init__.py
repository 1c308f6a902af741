"""Semi-discrete split-exponential solver for degenerate stochastic Kawarada problems."""

from .analysis import RateSurface, RefinementTriple, StudyReport, milne_pointwise, milne_spectral, rate_study
from .config import RunConfig, load_config, make_solver, parse_config, study_factory
from .errors import KawaradaError
from .grid import Mesh1D, Mesh2D, MeshMapping, build_mesh, build_mesh2d, compute_kh, refine_halve
from .operators import DegeneracyMatrix, SplitOperator, assemble, solve_with_M
from .reaction import ReactionField, sample_eps
from .stepper import KawaradaSolver, QuenchEvent, RunReport, SchemeParams, State

__version__ = "0.1.0"

__all__ = [
    "DegeneracyMatrix", "KawaradaError", "KawaradaSolver", "Mesh1D", "Mesh2D", "MeshMapping",
    "QuenchEvent", "RateSurface", "ReactionField", "RefinementTriple", "RunConfig", "RunReport",
    "SchemeParams", "SplitOperator", "State", "StudyReport", "assemble", "build_mesh", "build_mesh2d",
    "compute_kh", "load_config", "make_solver", "milne_pointwise", "milne_spectral", "parse_config",
    "rate_study", "refine_halve", "sample_eps", "solve_with_M", "study_factory",
]

"""Laboratory for restarted PDHG on random standard-form linear programs.

Generates LP instances with certified unique optima, solves them with
restarted PDHG, measures two-stage iteration counts and condition measures,
and reproduces tail-behavior, dimension-scaling and disparity experiments at
desk scale.
"""

__version__ = "0.1.0"

from . import kernel
from .errors import (CertificationError, ConvergenceError, DegenerateMatrixError,
                     InfeasibleError, InstanceParseError, InstanceValidationError,
                     NumericalDivergenceError, SingularMatrixError, UnsolvedRunError)
from .instances import (LpInstance, MatrixDistribution, SolutionDistribution,
                        assemble, disparity_ratio_level, gen_disparity, gen_instance,
                        load_instance, sample_matrix, sample_solution, save_instance,
                        write_mps)
from .linalg import (SpectralExtremes, lu_solve, matvec, matvec_t,
                     min_norm_presolve, spectral_extremes)
from .metrics import (ConditionReport, StageDecomposition, condition_report,
                      detect_stages, verify_bound_chain)
from .probes import (BruteForceResult, TailProbeResult, brute_force_lp,
                     probe_kappa, probe_phi, probe_sigma_max, probe_sigma_min)
from .solver import (IterateState, RunRecord, SolverConfig, StepSizes,
                     normalized_gap, one_pdhg, solve)

__all__ = [
    "__version__", "kernel",
    "CertificationError", "ConvergenceError", "DegenerateMatrixError",
    "InfeasibleError", "InstanceParseError", "InstanceValidationError",
    "NumericalDivergenceError", "SingularMatrixError", "UnsolvedRunError",
    "LpInstance", "MatrixDistribution", "SolutionDistribution", "assemble",
    "disparity_ratio_level", "gen_disparity", "gen_instance", "load_instance",
    "sample_matrix", "sample_solution", "save_instance", "write_mps",
    "SpectralExtremes", "lu_solve", "matvec", "matvec_t", "min_norm_presolve",
    "spectral_extremes",
    "ConditionReport", "StageDecomposition", "condition_report", "detect_stages",
    "verify_bound_chain",
    "BruteForceResult", "TailProbeResult", "brute_force_lp", "probe_kappa",
    "probe_phi", "probe_sigma_max", "probe_sigma_min",
    "IterateState", "RunRecord", "SolverConfig", "StepSizes", "normalized_gap",
    "one_pdhg", "solve",
]

"""Timeliness of multi-source bufferless preemptive status-update systems.

Analytic violation probabilities and densities of age and peak age for
general service laws, exact closed forms for exponential service, a
reproducible Monte Carlo simulator, and min-max arrival-rate allocation
under a total-rate budget.
"""

from .allocate import (AllocationProblem, AllocationResult, Metric, max_violation,
                       solve_equalize, solve_newton_barrier, sweep_allocation)
from .errors import (AgebenchError, InsufficientDataError, NumericsError,
                     SchemaError, SolverError)
from .laplace import TransformFn, bisect_monotone, integrate, invert
from .mg11 import (AgeDistribution, DistKind, SystemSpec, aoi_pdf, aoi_violation,
                   distribution, interdeparture_cdf, interdeparture_lt,
                   mean_interdeparture, paoi_pdf, paoi_violation, system_time_atoms,
                   system_time_pdf, tail_horizon)
from .mm11 import (Moments, RootPair, aoi_violation_closed, aoi_violation_grad,
                   aoi_violation_hess, interdeparture_cdf_closed,
                   interdeparture_pdf_closed, moments, paoi_pdf_closed,
                   paoi_violation_closed, paoi_violation_grad, paoi_violation_hess,
                   roots)
from .service import ServiceKind, ServiceModel
from .simulate import (SimConfig, SimPath, SimResult, collect_path, export_trace,
                       run, sample_paths, trace_events)

__version__ = "0.1.0"

__all__ = [
    "AgebenchError", "AgeDistribution", "AllocationProblem", "AllocationResult",
    "DistKind", "InsufficientDataError", "Metric", "Moments", "NumericsError",
    "RootPair", "SchemaError", "ServiceKind", "ServiceModel", "SimConfig",
    "SimPath", "SimResult", "SolverError", "SystemSpec", "TransformFn",
    "aoi_pdf", "aoi_violation", "aoi_violation_closed", "aoi_violation_grad",
    "aoi_violation_hess", "bisect_monotone", "collect_path", "distribution",
    "export_trace", "integrate", "interdeparture_cdf", "interdeparture_cdf_closed",
    "interdeparture_lt", "interdeparture_pdf_closed", "invert", "max_violation",
    "mean_interdeparture", "moments", "paoi_pdf", "paoi_pdf_closed",
    "paoi_violation", "paoi_violation_closed", "paoi_violation_grad",
    "paoi_violation_hess", "roots", "run", "sample_paths", "solve_equalize",
    "solve_newton_barrier", "sweep_allocation", "system_time_atoms",
    "system_time_pdf", "tail_horizon", "trace_events",
]

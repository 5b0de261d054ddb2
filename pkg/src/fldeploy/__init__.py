"""On-demand client deployment for federated learning.

A genetic solver for the multi-objective deployment problem, an exhaustive
oracle for small instances, a synthetic mobility corpus generator and a
round-based learning simulator, exposed through an HTTP service and a CLI.
"""

__version__ = "0.1.0"

from .domain import (  # noqa: F401
    AreaRequestVector,
    ClientProfile,
    DeploymentThresholds,
    ObjectiveWeights,
    ProblemInstance,
    SelectionVector,
    UtilizationProfile,
    validate_instance,
)
from .ga import GaConfig, InfeasibleInstanceError, ParetoArchive, solve  # noqa: F401
from .objectives import ObjectiveVector, dominates, eval_objectives, is_feasible  # noqa: F401
from .oracle import enumerate_pareto, hypervolume  # noqa: F401

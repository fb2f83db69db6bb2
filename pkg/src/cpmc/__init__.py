"""Canonical polyadic decomposition of function-defined tensors.

The solver minimizes a grid of hyperplane discrepancy functionals estimated
by Monte-Carlo sampling, updating one core column at a time with local
Newton, ALS or steepest-descent corrections.
"""

from .dense import (
    DenseReport,
    dense_global_discrepancy,
    dense_global_gradient,
    dense_local_discrepancy,
    dense_local_gradient,
    dense_report,
)
from .linalg import SingularMatrixError, gauss_jordan_invert, solve_local
from .mc import (
    GlobalEnsemble,
    HyperplaneEnsemble,
    LocalSystem,
    als_rhs,
    global_discrepancy,
    local_discrepancy,
    local_system,
    local_system_and_rhs,
    sample_global_ensemble,
    sample_hyperplane_ensemble,
)
from .model import CPModel, eval_cp, load_cpd1, residual_at, save_cpd1
from .oracles import (
    DENSE_CAP,
    CPSyntheticOracle,
    DenseArrayOracle,
    GaussianSineOracle,
    InverseRadiusOracle,
    RankOneOracle,
    TensorOracle,
)
from .solvers import (
    DEFAULT_MASTER_SEED,
    ConvergenceRecord,
    SolverConfig,
    als_sweep,
    init_random_start,
    newton_sweep,
    run,
    sd_sweep,
)

__version__ = "0.1.0"

__all__ = [
    "CPModel",
    "eval_cp",
    "residual_at",
    "save_cpd1",
    "load_cpd1",
    "TensorOracle",
    "InverseRadiusOracle",
    "GaussianSineOracle",
    "DenseArrayOracle",
    "RankOneOracle",
    "CPSyntheticOracle",
    "DENSE_CAP",
    "DenseReport",
    "dense_report",
    "dense_global_discrepancy",
    "dense_local_discrepancy",
    "dense_local_gradient",
    "dense_global_gradient",
    "HyperplaneEnsemble",
    "GlobalEnsemble",
    "LocalSystem",
    "sample_hyperplane_ensemble",
    "sample_global_ensemble",
    "global_discrepancy",
    "local_discrepancy",
    "local_system",
    "local_system_and_rhs",
    "als_rhs",
    "SingularMatrixError",
    "gauss_jordan_invert",
    "solve_local",
    "SolverConfig",
    "ConvergenceRecord",
    "DEFAULT_MASTER_SEED",
    "init_random_start",
    "newton_sweep",
    "als_sweep",
    "sd_sweep",
    "run",
    "__version__",
]

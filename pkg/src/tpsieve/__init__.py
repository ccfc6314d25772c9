"""Penalized sieve regression in tensor product spaces."""

from .basis import BasisKind, basis_table, eval_basis, eval_basis_row
from .design import build_design, eval_product_basis
from .kernel import KrrModel, gram, krr_fit, product_kernel, w1_kernel
from .model import (
    CVConfig,
    Dataset,
    FitConfig,
    SieveModel,
    cross_validate,
    default_hyperparams,
    fit_sieve,
    load_model,
    predict,
    save_model,
)
from .simulate import SimulationSpec, evaluate, generate_dataset, rate_experiment
from .solvers import LassoConfig, SolveResult, lambda_max, lasso_fit, lasso_path, ols_fit
from .unravel import (
    IndexMatrix,
    big_t,
    factorizations,
    generate_index_matrix,
    index_matrix_for_count,
    tau,
)

__version__ = "0.1.0"

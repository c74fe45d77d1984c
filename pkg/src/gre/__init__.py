"""Gauss-Richardson extrapolation.

Extrapolate a sequence of approximations ``f(x)`` to the limit ``f(0)`` with
a flat-limit Gaussian process whose prior variance shrinks like a known
error bound, and plan which fidelities to run under a cost budget.
"""

from ._backend import BACKEND
from .classical import Sequence, e_algorithm, germain_bonne, richardson, shanks, thiele
from .core import (
    AdditiveMonomials,
    CustomPolynomial,
    Dataset,
    GreModel,
    GrePosterior,
    Monomial,
    ProductMonomials,
    credible_interval,
    finite_k0_posterior,
    fit,
    predict,
)
from .design import DesignProblem, DesignSolution, optimize_design
from .kernels import Family, KernelSpec, TensorKernel
from .multioutput import GridDataset, fit_grid
from .order import OrderGrid, estimate_axiswise, estimate_order
from .simulator import SimulatorSpec, WorkflowConfig, run_workflow

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "AdditiveMonomials",
    "CustomPolynomial",
    "Dataset",
    "DesignProblem",
    "DesignSolution",
    "Family",
    "GreModel",
    "GrePosterior",
    "GridDataset",
    "KernelSpec",
    "Monomial",
    "OrderGrid",
    "ProductMonomials",
    "Sequence",
    "SimulatorSpec",
    "TensorKernel",
    "WorkflowConfig",
    "credible_interval",
    "e_algorithm",
    "estimate_axiswise",
    "estimate_order",
    "finite_k0_posterior",
    "fit",
    "fit_grid",
    "germain_bonne",
    "optimize_design",
    "predict",
    "richardson",
    "run_workflow",
    "shanks",
    "thiele",
]

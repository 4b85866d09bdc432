"""Fourth-order finite differences from the C0-Q2 finite element method
with 3x3 Gauss-Lobatto quadrature, plus fast Kronecker solvers and a
convergence-study harness."""

from .assembly import (EllipticOperator, LinearSystem, assemble_operator, assemble_stiffness_1d,
                       build_stencils, laplacian_operator, neumann_full_system, reduce_dirichlet)
from .grid import GridFunction, TensorGrid, build_grid, norm_2_Z0, norm_inf_Z0, sample
from .harness import SolverConfig, run_convergence, run_solve
from .problems import ProblemSpec, builtin, load_problem
from .solvers import SolverFailure, direct_solve, fast_poisson_solve, pcg

__version__ = "0.1.0"

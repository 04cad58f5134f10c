"""Global-in-time domain decomposition for advection-diffusion in porous media.

Upwind mixed-hybrid RT0 discretization in space, backward Euler in time with
one time grid per subdomain, and two interface formulations: a Schur
(Steklov-Poincare) problem with a Neumann-Neumann preconditioner, and a Robin
problem solved by GMRES or by optimized Schwarz waveform relaxation.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError, DegenerateElement, GridMismatch, InvalidGrid, InvalidPartition, InvalidRobinParameter,
    LtsddError, MisalignedPartition, SingularMatrix, WindowFailure,
)
from .geometry import Decomposition, Mesh, build_mesh, decompose, uniform_coords
from .interface import DDProblem, DDResult, Method, Weights, run_time_windows
from .linsolve import Factorization, KrylovReport, gmres, lu_factor, lu_solve
from .mhfe import Coefficients, InterfaceBC, StepSystem, UpwindMode, assemble_step, local_mass_matrix, solve_step
from .optim import InterfaceModel, convergence_factor, optimize_parameters, parameter_sweep
from .propagate import (
    SpaceTimeSolution, SubdomainProblem, SubdomainSolver, solve_darcy, solve_dirichlet, solve_monodomain,
    solve_neumann, solve_robin,
)
from .timegrid import TimeGrid, TimeSeries, compose_projection_check, project, projection_matrix

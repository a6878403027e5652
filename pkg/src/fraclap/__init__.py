"""2D finite-element solver for a fractional-Laplacian turbulence closure
of the Navier-Stokes equations on the unit square, with truncated nonlocal
interactions, coupled and modular IMEX time stepping, the closed-form Pao
energy spectrum, and a manufactured-solution convergence harness."""

from .fem import build_dof_map, interpolate, quadrature_rule, reference_basis_p1, reference_basis_p2
from .mesh import HALO, OMEGA, Mesh, build_rectangle_mesh, load_mesh, save_mesh
from .nonlocal_assembly import (
    BACKEND_NAME,
    DenseOperator,
    FractionalParams,
    apply_fractional,
    assemble_fractional,
    classify_pair,
    kernel_constant,
)
from .spectrum import SpectrumParams, energy_spectrum, fit_loglog_slope, inertial_slope, make_params
from .timestepping import (
    COUPLED_IMEX,
    MODULAR,
    Operators,
    SchemeConfig,
    State,
    build_operators,
    run,
    step_coupled,
    step_modular,
)

__version__ = "0.1.0"

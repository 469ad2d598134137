"""g-expectations on a binomial lattice, g-capacities and their Choquet integrals."""

from .bsde import (
    SolutionSurface,
    conditional_slice,
    g_expectation,
    representation_slope,
    solve_bsde,
    z_sign_report,
)
from .choquet import Capacity, ChoquetResult, additivity_gaps, choquet_expectation, g_capacity
from .claim import TerminalClaim, comonotonic_check, eval_claim, parse_claim, superlevel_set
from .closedform import (
    GaussianSpec,
    girsanov_linear_expectation,
    monotone_kappa_expectation,
    normal_cdf,
    normal_pdf,
    threshold_claim_solution,
    window_claim_z,
)
from .driver import (
    Custom,
    KappaIgnorance,
    Linear,
    TimeFunction,
    Zero,
    classify_linearity,
    eval_driver,
    parse_driver,
    validate_hypotheses,
)
from .errors import ConfigurationError, DomainError, NlxError, PreconditionError
from .lattice import LatticeGrid, build_lattice, terminal_slice
from .pde import PdeSurface, feynman_kac_compare, solve_nonlinear_heat

__version__ = "0.1.0"

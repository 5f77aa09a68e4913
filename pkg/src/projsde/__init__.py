"""Projection estimation of the squared diffusion coefficient from N discretely observed paths."""

from .basis import BasisSpec, ConstraintBall, eval_basis, eval_basis_derivative
from .bench import RateLadder, fit_slope, run_ladder
from .density import DensityTransforms, exit_probability, occupation_density, transition_density
from .errors import (CodebookInfeasible, ConfigError, DegenerateAbscissae, DegenerateKnots,
                     InsufficientRungs, MissingFineGrid, NonPositiveSigma, NumericalError,
                     PreconditionError, ProjSDEError, QuadratureFailure, SimulationDiverged,
                     SingularDesign)
from .estimator import Estimate, dimension_rule, fit, truncate
from .gram import estimate_gram, gram_condition_sweep, norm_equivalence_monitor
from .minimax import build_codebook, build_hypotheses, kl_budget
from .model import (Compact, DiffusionModel, Growing, RealLine, check_assumptions,
                    constant_model, custom_model, example_model)
from .regression import build_regression, decompose_residuals
from .risk import ExperimentSpec, estimation_risk
from .simulate import PathSample, simulate_sample

__version__ = "0.1.0"

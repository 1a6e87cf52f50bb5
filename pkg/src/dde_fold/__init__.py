"""Saddle-node bifurcation of large-amplitude periodic orbits for x'(t) = -x(t) + f_K(x(t-1))."""
from .bifurcation import BifurcationPoint, BranchPoint, branch_point, locate_fold, solve_phi, sweep_branch
from .derivatives import MapJet, fd_check, jet
from .errors import (
    CertificationError,
    ConvergenceError,
    DegreeOverflowError,
    DerivedDomainWarning,
    DomainError,
    EventClusterWarning,
)
from .oracle import HistoryFunction, integrate, poincare_return, residual
from .orbit import PeriodicProfile, assemble_profile, check_hypotheses
from .params import FeedbackParams, eval_feedback, fixed_points
from .reduced_map import MapDomainPoint, L2_hat, derive_params, eval_F, residuals_B, solve_K0, theta_star

__version__ = "0.1.0"

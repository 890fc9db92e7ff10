"""Numerical checks of path-independence for Girsanov densities of SDEs.

The density process Zhat_t of dX = b dt + sigma dB is a function of
(t, X_t) exactly when b = sigma sigma^T grad v with v solving a
time-reversed KPZ equation.  This package simulates the SDE, accumulates
Zhat, and tests that identity pathwise, alongside a Cole-Hopf solver for the
PDE and the one-dimensional Burgers reduction.
"""

from .errors import (
    ConfigError,
    DimensionMismatch,
    KPZLabError,
    NonFiniteState,
    NonFiniteValue,
    NonPositiveW,
    QuadratureFailure,
    SingularMatrix,
    UnstableParameters,
    ZeroDiffusion,
)
from .fields import FieldBundle, Potential, Scenario, build_scenario
from .sde import GaussianStream, PathRecord, TimeGrid, simulate_ensemble, simulate_path
from .girsanov import GirsanovSeries, density_process, martingale_check
from .verify import Thresholds, VerificationReport, refinement_study, run_verification, verdict

__version__ = "0.1.0"

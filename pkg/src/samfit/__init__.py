"""Sparse additive regression on a regular lattice via Fourier-domain MAP selection."""

from .errors import SamfitError
from .fourier import Spectrum, energy_tail, forward_dft, inverse_dft
from .lattice import (
    AveragedData,
    ComponentFunction,
    LatticeDesign,
    full_lattice_average,
    synthesize_marginal,
    validate_design,
)
from .map_estimator import (
    AxisScore,
    MapFit,
    PriorConfig,
    axis_prior,
    estimate_tau,
    map_fit,
    map_objective,
    penalty_axis,
    penalty_global,
    score_axis,
    select_components,
    validate_priors,
)
from .simulation import (
    ScenarioConfig,
    amse,
    brute_force_map,
    oracle_lambda,
    run_scenario,
    standardize,
    test_function,
)
from .spam import SpamFit, spam_fit, spam_shrink

__version__ = "0.1.0"

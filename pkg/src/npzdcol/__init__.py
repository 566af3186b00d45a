"""One-dimensional four-pool (N, P, Z, D) plankton column simulator.

The model couples vertical turbulent diffusion, detritus sinking, and
nonlinear biological sources on a water column, and ships with the
verification machinery for the estimates the construction relies on:
positivity, nitrogen budget closure, linear growth envelopes, Gronwall
norms, Lipschitz constants, and the contraction of the per-slab
fixed-point iteration.
"""

from .analysis import (ConvergenceResult, DependenceReport, EstimateReport,
                       bilinear_form, budget_residuals, coercivity_constant,
                       coercivity_lambda, convergence_study, dependence_report,
                       discrete_norms, empirical_continuity_ratio,
                       gronwall_log_margins, pointwise_lipschitz,
                       preset_scenario, state_norms, verify_run)
from .config import (ConfigError, RunSetup, build_setup, emit_toml,
                     load_config, resolved_config)
from .core import (Grid, GrazingVariant, LightVariant, ModelParams,
                   MortalityVariant, StateVector, Trajectory, default_params,
                   total_nitrogen)
from .forcing import (ConstantIrradiance, ConstantMixing, DiurnalIrradiance,
                      FileIrradiance, FileMixing, SeasonalMixing,
                      load_irradiance_file, load_mixing_file)
from .optics import (BandVariant, OpticalParams, chl_equiv, light_limit,
                     lipschitz_K_I, par, par_profile, saturation_scale)
from .reactions import (BoundConstants, bound_constants, eval_reaction, graze,
                        grazing_lipschitz, limit_nutrient, lipschitz_bound,
                        mortality_lipschitz, truncate, zoo_mortality)
from .solver import (BlowUpError, PicardNonConvergence, SolverConfig,
                     resolve_lambda, run_picard, run_splitting, step_advection,
                     step_diffusion, step_reaction)

__version__ = "0.1.0"

__all__ = [
    "BandVariant", "BlowUpError", "BoundConstants", "ConfigError",
    "ConstantIrradiance", "ConstantMixing", "ConvergenceResult",
    "DependenceReport", "DiurnalIrradiance", "EstimateReport",
    "FileIrradiance", "FileMixing", "Grid", "GrazingVariant", "LightVariant",
    "ModelParams", "MortalityVariant", "OpticalParams",
    "PicardNonConvergence", "RunSetup", "SeasonalMixing", "SolverConfig",
    "StateVector", "Trajectory", "bilinear_form", "bound_constants",
    "budget_residuals", "build_setup", "chl_equiv", "coercivity_constant",
    "coercivity_lambda", "convergence_study", "default_params",
    "dependence_report", "discrete_norms", "emit_toml",
    "empirical_continuity_ratio", "eval_reaction", "graze",
    "grazing_lipschitz", "gronwall_log_margins", "light_limit",
    "limit_nutrient", "lipschitz_K_I", "lipschitz_bound", "load_config",
    "load_irradiance_file", "load_mixing_file", "mortality_lipschitz", "par",
    "par_profile", "pointwise_lipschitz", "preset_scenario", "resolve_lambda",
    "resolved_config", "run_picard", "run_splitting", "saturation_scale",
    "state_norms", "step_advection", "step_diffusion", "step_reaction",
    "total_nitrogen", "truncate", "verify_run", "zoo_mortality",
]

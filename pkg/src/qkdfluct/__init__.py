"""Finite-sample secure key rates for a vacuum + weak decoy-state protocol
with after-pulsing, five statistical fluctuation estimators and a Monte
Carlo oracle for the correlated detection record."""

from .channel import (ChannelParams, ModelOutputs, SourceConfig,
                      apply_afterpulse, background_gain, gain, model_outputs,
                      observed_qber, transmittance_from_loss, vacuum_yield)
from .config import MODES, ConfigError, RunConfig, apply_overrides, parse_config
from .errors import DegenerateSampleError, EstimationFailure, ParameterError
from .fluctuation import (METHODS, BoundResult, ChernoffDeltas, FailureBudget,
                          ObservableTallies, SampleStat, bounded_observables,
                          chernoff_better_than_hoeffding_threshold,
                          chernoff_case_deltas, chernoff_conditions,
                          chernoff_deltas, deviation_radii,
                          failure_prob_for_quantile, observable_tallies,
                          quantile_for_failure_prob, sea_better_than_lln,
                          xi_azuma, xi_hoeffding, xi_lln, xi_standard_error)
from .keyrate import (DEFAULT_SEARCH_BOX, KeyRatePoint, SearchBox,
                      binary_entropy, e1_upper, key_rate, key_rate_point,
                      optimize_parameters, q1z_from_y1, y1_lower)
from .markov import (MarkovClickModel, MartingaleCheck, TrialReport,
                     coverage_test, martingale_verify, simulate_chain,
                     simulate_click_frequency, trial_report)

__version__ = "0.1.0"

__all__ = [
    "ChannelParams", "ModelOutputs", "SourceConfig", "apply_afterpulse",
    "background_gain", "gain", "model_outputs", "observed_qber",
    "transmittance_from_loss", "vacuum_yield",
    "MODES", "ConfigError", "RunConfig", "apply_overrides", "parse_config",
    "DegenerateSampleError", "EstimationFailure", "ParameterError",
    "METHODS", "BoundResult", "ChernoffDeltas", "FailureBudget",
    "ObservableTallies", "SampleStat", "bounded_observables",
    "chernoff_better_than_hoeffding_threshold", "chernoff_case_deltas",
    "chernoff_conditions", "chernoff_deltas", "deviation_radii",
    "failure_prob_for_quantile", "observable_tallies",
    "quantile_for_failure_prob", "sea_better_than_lln", "xi_azuma",
    "xi_hoeffding", "xi_lln", "xi_standard_error",
    "DEFAULT_SEARCH_BOX", "KeyRatePoint", "SearchBox", "binary_entropy",
    "e1_upper", "key_rate", "key_rate_point", "optimize_parameters",
    "q1z_from_y1", "y1_lower",
    "MarkovClickModel", "MartingaleCheck", "TrialReport", "coverage_test",
    "martingale_verify", "simulate_chain", "simulate_click_frequency",
    "trial_report",
    "__version__",
]

"""Cost-effectiveness modelling of human-AI diabetic-retinopathy screening strategies."""

from .cea import (CeaRecord, CeClass, Tag, WtpPolicy, classify, classify_deltas, cea_record,
                  cost_per_blindness_year_averted, frontier, icer, nmb, nmb_crossing)
from .config import Config, ConfigError, load_config, EXAMPLE_CONFIG
from .markov import (CohortTrace, HealthState, MarkovParameters, ScenarioResult, ScenarioSpec,
                     aggregate_scenario, discount, run_cohort, simulate)
from .model import ModelInputs, evaluate_cell, get_path, with_path
from .sensitivity import (DistributionSpec, PsaResult, TornadoBar, ceac, horizon_sweep,
                          run_psa, threshold_scan, tornado, wtp_switch_points)
from .strategy import (DiagnosticPerformance, FilterParams, GraderProfile, accuracy,
                       closed_form_performance, enumerate_performance, implied_prevalence,
                       make_registry, parse_strategy, to_expression)

__version__ = "0.1.0"

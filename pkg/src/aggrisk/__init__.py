"""Aggregate risk analysis of catastrophe reinsurance portfolios.

Primary uncertainty (which events occur in a simulated year) comes from a
pre-simulated year event table; secondary uncertainty (how large the loss of
an occurring event is) is sampled from a beta distribution fitted to each
event's mean, spread and maximum loss.
"""

from .datagen import GenSpec, generate_layer, generate_portfolio, generate_yet
from .engine import PU, SU, AnalysisError, RunConfig, run_analysis, run_split, trial_loss
from .lookup import LossLookup, MemoryBudgetError, build_loss_lookup
from .metrics import exceedance_curve, pml, tvar
from .model import (
    EltTerms,
    EventOccurrence,
    ExtendedEventLoss,
    Layer,
    LayerTerms,
    Portfolio,
    Program,
    Trial,
    Xelt,
    YearEventTable,
    YearLossTable,
    apply_aggregate_terms,
    apply_elt_terms,
    apply_occurrence_terms,
)
from .stats import (
    IterationLimitError,
    Precision,
    inverse_beta_cdf,
    normal_cdf,
    normal_quantile,
    regularized_incomplete_beta,
)
from .uncertainty import beta_parameters, combine_std_dev, sample_secondary_loss

__version__ = "0.1.0"

"""Studentized randomization tests for matched pairs with missing values."""

from .distributions import (
    CovarianceSpec,
    ScenarioConfig,
    generate_mcar_sample,
    generate_sample,
    matrix_sqrt_2x2,
    standardized_error,
)
from .errors import PairPermError
from .harness import StudyGrid, StudyTable, emit_plot_data, read_plot_data, run_study
from .randomization import (
    ConfidenceInterval,
    PermutationTestResult,
    RandomizationDraw,
    TostResult,
    apply_draw,
    confidence_interval,
    exact_permutation_test,
    mc_permutation_test,
    permutation_statistic,
    tost_equivalence_test,
)
from .sample import PartiallyPairedSample, SampleSummary, from_records, summarize
from .statistics import (
    StatisticValue,
    TestOutcome,
    WeightRule,
    asymptotic_test,
    complete_weight,
    kim_t3_statistic,
    lin_stivers_statistic,
    paired_t_statistic,
    reference_p_value,
    sw_scale,
    weighted_statistic,
    welch_statistic,
)

__version__ = "0.1.0"

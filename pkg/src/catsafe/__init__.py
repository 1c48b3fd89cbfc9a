"""catsafe: category-level differential-expression testing.

Two-stage tests of gene categories: per-gene local statistics, category
global statistics, and p-values under three nulls (i.i.d./gene permutation,
array permutation, bootstrap pivot), plus the analytic variance tools and
the Monte Carlo calibration/power harness that compare them.
"""

__version__ = "0.1.0"

from .model import (  # noqa: F401
    CategoryCollection,
    CategoryEntry,
    CatsafeError,
    ConvergenceError,
    DegenerateGeneError,
    ExpressionMatrix,
    InputError,
    ResamplingError,
    Response,
    ResponseKind,
    TopR,
    TwoSided,
    UpperTail,
)
from .local import (  # noqa: F401
    AnovaF,
    CoxWald,
    EmpiricalP,
    LocalStatVector,
    LogFoldChange,
    PooledT,
    SamT,
    Sidedness,
    compute_local,
    de_scores,
    to_empirical_p,
)
from .globalstat import (  # noqa: F401
    AvgDiff,
    FisherCount,
    GlobalResult,
    PearsonDiffProp,
    WilcoxonRankSum,
    compute_global,
)
from .class1 import Class1Result, class1_test, gene_permutation_test  # noqa: F401
from .resample import (  # noqa: F401
    CategoryTestResult,
    Interval,
    Method,
    NullDistribution,
    ResamplingPlan,
    bootstrap_pivot_test,
    build_null,
    empirical_pvalue,
    null_center_theta0,
)
from .analytic import (  # noqa: F401
    CorrelationSummary,
    bvn_cdf,
    correlation_summary,
    is_correlation_dominant,
    lemma_b2_scan,
    var_inflation_avgdiff,
    variance_dominance_check,
    wilcoxon_var_correlated,
)
from .multiplicity import MultiplicityReport, bonferroni, fwer_estimate  # noqa: F401
from .io import (  # noqa: F401
    align_and_filter,
    parse_expression_matrix,
    parse_gmt,
    parse_response,
)

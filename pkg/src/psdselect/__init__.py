"""PSD feature extraction, filter feature selection and classifier evaluation
for binary mental-task EEG classification."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    DataError,
    DegenerateInputError,
    NumericError,
    ParseError,
    PsdSelectError,
    SolverError,
)
from .signals import (  # noqa: E402
    BandComponent,
    Dataset,
    SegmentedSample,
    SynthSpec,
    TimeSeriesSegment,
    Trial,
    load_dataset,
    segment_trial,
    synth_generate,
    write_dataset,
)
from .spectral import (  # noqa: E402
    ArModel,
    ExtractionConfig,
    FrequencyGrid,
    MusicConfig,
    PsdEstimate,
    WelchConfig,
    WindowFunction,
    aic,
    ar_psd,
    autocorr_matrix,
    band_power,
    burg_fit,
    canonical_grid,
    extract_features,
    music_psd,
    periodogram,
    pisarenko_psd,
    select_ar_order,
    welch_psd,
)
from .selection import (  # noqa: E402
    LabeledFeatureMatrix,
    SelectionTrace,
    bhattacharyya_distance,
    chernoff_distance,
    corr_score,
    fdr_score,
    forward_select,
    mi_score,
    mrmr_mid,
    rank_univariate,
    ranksum_score,
    regression_r2,
    scatter_ratio,
)
from .classify import (  # noqa: E402
    ClassifierSpec,
    CvConfig,
    CvReport,
    cv_accuracy,
    incremental_evaluation,
    lda_train,
    qda_train,
    stratified_kfold,
    svm_train,
)
from .stats import (  # noqa: E402
    ComparisonTable,
    control_pvalues,
    friedman_test,
    percentage_gain,
    posthoc_adjust,
    posthoc_vs_control,
    robust_rank,
    significance_report,
)
from .pipeline import ExperimentConfig, RedundancyConfig, RunReport, emit_tables, run_experiment  # noqa: E402


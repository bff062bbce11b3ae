"""seqmix: mixture-of-Markov-chains clustering and next-event prediction
for variable-length categorical sequences."""

from .errors import (
    EstimationError,
    IngestionError,
    NumericalError,
    ParameterError,
    SeqmixError,
)
from .traces import (
    CANONICAL_SYMBOLS,
    Alphabet,
    Dataset,
    RawAction,
    Trace,
    build_traces,
    canonical_alphabet,
    dataset_features,
    map_action,
    proportional_counts,
    read_raw_log,
    read_traces_jsonl,
    write_traces_jsonl,
)
from .markov import (
    MarkovChain,
    chain_from_json,
    chain_to_dot,
    chain_to_json,
    fit_chain,
    log_likelihood,
    predict_next,
    stationary_distribution,
    to_figure,
)
from .kmeans import KMeansResult, kmeans, suggest_k, wcss_curve
from .mixture import (
    MixtureModel,
    SelectKResult,
    e_step,
    fit_mixture,
    information_criteria,
    init_em_em,
    init_k_em,
    init_random,
    m_step,
    mixture_from_json,
    mixture_to_json,
    parameter_count,
    run_em,
    select_k_by_ic,
)
from .evaluation import (
    MetricsReport,
    PairedCI,
    PredictionRecord,
    compute_metrics,
    label_dataset,
    label_trace,
    paired_ci,
    paired_interval,
    predict_trace,
)
from .harness import (
    ExperimentConfig,
    ExperimentResult,
    FoldAssignment,
    SyntheticSpec,
    adjusted_rand_index,
    assign_folds,
    generate_synthetic,
    planted_spec,
    run_baseline,
    run_experiment,
    write_bundle,
)

__version__ = "0.1.0"

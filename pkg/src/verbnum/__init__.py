"""Number-agreement toolkit: synthetic grammars, LSTM classifiers, stimulus
designs, and ensemble evaluation for studying agreement attraction errors."""

__version__ = "0.1.0"

from .corpus import (
    AnnotatedSentence,
    CorpusError,
    Preamble,
    attractor_count,
    extract_preamble,
    generate_corpus,
    load_preambles,
    save_preambles,
)
from .evaluation import (
    HUMAN_REFERENCE,
    AttractorCurve,
    ConditionStats,
    EvalError,
    EvalRecord,
    attractor_curve,
    condition_stats,
    contrast,
    direction_p,
    evaluate,
    evaluate_corpus,
    exclude_outlier_items,
    paired_item_diffs,
    select_records,
)
from .grammar import GrammarError, GrammarSpec, load_grammar, parse_grammar
from .lexicon import (
    LexEntry,
    LexiconError,
    Number,
    Vocabulary,
    build_vocabulary,
    load_lexicon,
)
from .network import (
    ModelParams,
    NetworkError,
    NumericalError,
    backward,
    batch_backward,
    forward,
    forward_probe,
    init_params,
    load_checkpoint,
    predict,
    save_checkpoint,
    verify_gradients,
)
from .reporting import Finding, ReportError, directional_findings, render_report
from .stimuli import (
    ConditionLabel,
    Stimulus,
    StimulusError,
    StimulusSet,
    condition_labels,
    gen_exp1,
    gen_exp2,
    gen_exp2_reversed,
    gen_rc_length_probe,
    load_stimuli,
    save_stimuli,
    validate_derivable,
)
from .trainer import (
    TrainConfig,
    TrainError,
    TrainLog,
    error_rate,
    parse_config,
    train_ensemble,
    train_replica,
)

__all__ = [
    "__version__",
    "AnnotatedSentence", "CorpusError", "Preamble", "attractor_count",
    "extract_preamble", "generate_corpus", "load_preambles", "save_preambles",
    "HUMAN_REFERENCE", "AttractorCurve", "ConditionStats", "EvalError",
    "EvalRecord", "attractor_curve", "condition_stats", "contrast",
    "direction_p", "evaluate", "evaluate_corpus", "exclude_outlier_items",
    "paired_item_diffs", "select_records",
    "GrammarError", "GrammarSpec", "load_grammar", "parse_grammar",
    "LexEntry", "LexiconError", "Number", "Vocabulary", "build_vocabulary",
    "load_lexicon",
    "ModelParams", "NetworkError", "NumericalError", "backward",
    "batch_backward", "forward", "forward_probe", "init_params",
    "load_checkpoint", "predict", "save_checkpoint", "verify_gradients",
    "Finding", "ReportError", "directional_findings", "render_report",
    "ConditionLabel", "Stimulus", "StimulusError", "StimulusSet",
    "condition_labels", "gen_exp1", "gen_exp2", "gen_exp2_reversed",
    "gen_rc_length_probe", "load_stimuli", "save_stimuli", "validate_derivable",
    "TrainConfig", "TrainError", "TrainLog", "error_rate", "parse_config",
    "train_ensemble", "train_replica",
]

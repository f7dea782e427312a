"""Age annotation from pairwise comparisons.

Core pieces: a discrete-grid posterior engine over older/younger judgments,
the labelling pipeline (bracketed reference selection, outlier discard),
an ordinal rank head with a fixed response-to-distribution map, simulated
annotators with evaluation metrics, and an HTTP annotation service.
"""

from .annotate import (
    AgeGroup,
    AnnotationRecord,
    EmptySupport,
    ExactAge,
    Gender,
    GroundTruthSpec,
    InsufficientPool,
    NoEvidence,
    QueryItem,
    RawPosterior,
    ReferenceItem,
    SelectionPolicy,
    build_gt_posterior,
    finalize_annotation,
    rough_age_estimate,
    select_references,
)
from .betafit import FitDiverged, fit_beta, golden_section_minimize
from .grid import AgeDistribution, AgeGrid
from .metrics import LengthMismatch, MetricReport, adience_group_of, evaluate
from .ordinal import (
    DimensionMismatch,
    OrdinalHead,
    PosteriorMap,
    forward_ordinal,
    forward_posterior,
    loss_cost_sensitive,
    loss_kl,
    predict_ohrank,
)
from .posterior import (
    ComparisonEvent,
    DegenerateEvidence,
    LogisticModel,
    Outcome,
    ci_width,
    comparison_likelihood,
    confidence_interval,
    is_outlier,
    mode,
    posterior_from_events,
)
from .simulate import (
    AnnotatorMode,
    SimulatedAnnotator,
    ci_narrowing_experiment,
    simulate_comparison,
)
from .training import (
    NonFiniteLoss,
    TrainConfig,
    evaluate_head,
    load_checkpoint,
    save_checkpoint,
    synth_dataset,
    train,
)

__version__ = "0.1.0"

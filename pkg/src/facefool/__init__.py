"""Adversarial attacks on grayscale face classifiers.

Seven attack procedures (single- and two-pixel inversions, greedy
iteration, three checkerboard-noise bands, a dual attack, and FGSM with a
breaking-point epsilon search), a pluggable classifier-oracle abstraction
with a built-in trainable softmax model, and an evaluation harness that
measures confidence decrease and misclassification rate.
"""

from .attacks import (
    AttackConfig,
    AttackOutcome,
    CandidateEvaluation,
    EscalationRound,
    attack_a,
    attack_b,
    attack_c,
    attack_checkerboard,
    attack_fgsm,
    attack_g,
    escalate_until_misclassified,
    run_attack,
    sample_candidates,
)
from .dataset import (
    Dataset,
    LabeledImage,
    desk_dataset,
    generate_synthetic,
    load_directory,
    make_class_templates,
    split_train_test,
)
from .errors import (
    DatasetError,
    FacefoolError,
    ModelError,
    OracleError,
    PgmError,
    ProtocolError,
    UsageError,
)
from .image import (
    GrayscaleImage,
    GridCell,
    PixelCoordinate,
    apply_checkerboard_noise,
    invert_pixel,
    load_pgm,
    partition_grid,
    save_pgm,
)
from .oracle import (
    ClassProbabilities,
    Oracle,
    SoftmaxModel,
    TrainConfig,
    accuracy,
    load_model,
    save_model,
    train_softmax,
)
from .report import (
    EvaluationReport,
    ImageResult,
    build_report,
    conf_decrease,
    misclass_rate,
    read_csv,
    render_bar_chart,
    write_csv,
)
from .rng import Pcg32, derive_seed
from .wire import ExternalOracle, OracleTCPServer, connect_external, serve_stdio

__version__ = "0.1.0"

__all__ = [
    "AttackConfig", "AttackOutcome", "CandidateEvaluation", "EscalationRound",
    "attack_a", "attack_b", "attack_c", "attack_checkerboard", "attack_fgsm",
    "attack_g", "escalate_until_misclassified", "run_attack", "sample_candidates",
    "Dataset", "LabeledImage", "desk_dataset", "generate_synthetic",
    "load_directory", "make_class_templates", "split_train_test",
    "DatasetError", "FacefoolError", "ModelError", "OracleError", "PgmError",
    "ProtocolError", "UsageError",
    "GrayscaleImage", "GridCell", "PixelCoordinate", "apply_checkerboard_noise",
    "invert_pixel", "load_pgm", "partition_grid", "save_pgm",
    "ClassProbabilities", "Oracle", "SoftmaxModel", "TrainConfig", "accuracy",
    "load_model", "save_model", "train_softmax",
    "EvaluationReport", "ImageResult", "build_report", "conf_decrease",
    "misclass_rate", "read_csv", "render_bar_chart", "write_csv",
    "Pcg32", "derive_seed",
    "ExternalOracle", "OracleTCPServer", "connect_external", "serve_stdio",
]

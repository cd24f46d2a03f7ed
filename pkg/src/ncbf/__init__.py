"""Near-field nulling-control beam focusing toolkit.

Closed-form LCMV weight synthesis for extra-large linear arrays, dataset
generation for learning those weights, a small numpy MLP trainer with circular
and dB losses, beam-pattern evaluation metrics, and timing benchmarks.
"""

from .array_model import (
    SPEED_OF_LIGHT,
    ArrayConfig,
    PolarPosition,
    SteeringVector,
    element_positions,
    element_ranges,
    rayleigh_distance,
    reference_array,
    steering_matrix,
    steering_vector,
)
from .beamformer import (
    CONDITION_LIMIT,
    DegenerateScenarioError,
    NcbfWeights,
    ScenarioConstraints,
    build_constraints,
    decompose,
    gram_condition_estimate,
    lcmv_weights,
    mdb_weights,
    unit_power_normalize,
    wrap_to_two_pi,
)
from .benchtime import BenchRecord, bench_dnn, bench_lcmv, loglog_slope, write_bench_csv
from .datagen import (
    Dataset,
    DatasetFormatError,
    SamplingError,
    Scenario,
    ScenarioBounds,
    generate_dataset,
    load_dataset,
    make_features,
    make_labels,
    sample_scenario,
    save_dataset,
)
from .evalmetrics import (
    EvalReport,
    PolarGrid,
    beam_gain,
    beam_pattern,
    evaluate_model,
    ncbf_gain,
    null_angular_deviation,
    null_range_deviation,
    write_pattern_csv,
)
from .neural import (
    LOSS_CMAE,
    LOSS_RMSE,
    CheckpointFormatError,
    LossHistory,
    MlpModel,
    TrainConfig,
    TrainingDivergedError,
    cmae_loss,
    forward,
    init_model,
    load_model,
    reconstruct_weights,
    rmse_loss,
    save_model,
    train,
    tune_architectures,
    wrap_to_pi,
)

__version__ = "0.1.0"

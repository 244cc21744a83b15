"""Learning low-rank decompositions of the matrix multiplication tensor
with a conservatively trained multiplier network."""

from .cl_update import (
    UpdateIntermediates,
    UpdateMode,
    apply_G,
    backprop_alpha_beta,
    compute_gamma,
    conservative_update,
    linear_cl_update,
)
from .errors import (
    ConditioningError,
    DimensionError,
    InputError,
    NormalizationError,
    SizeError,
    StrassenCLError,
    WeightFileError,
)
from .network import ForwardState, TrainingItem, forward, init_weights, strassen_fixture
from .tensor_core import (
    MatMulTensor,
    WeightSet,
    build_matmul_tensor,
    decomposition_error,
    load_weights,
    reconstruct_tensor,
    roll,
    save_weights,
    standard_weights,
    transform_decomposition,
    unroll,
)
from .trainer import (
    Classification,
    Outcome,
    RunConfig,
    RunTrace,
    TraceSample,
    classify_run,
    max_weight_magnitude,
    run_training,
    sample_item,
)

__version__ = "0.1.0"

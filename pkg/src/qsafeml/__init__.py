"""Safety monitoring for quantum classifiers.

Prediction outcomes are turned into density matrices.  Quantum distance
metrics (trace distance, fidelity, Bures distance, relative entropy) are
computed between the correctly and incorrectly classified sets, related to
accuracy, and thresholded into safety flags.
"""

from .linalg import HermitianEigen, eig_hermitian, mat_log_psd, mat_sqrt_psd, trace_norm
from .metrics import (
    METRIC_KINDS,
    MetricValue,
    bures_distance,
    closeness_to_accuracy,
    fidelity,
    pearson_correlation,
    quantum_relative_entropy,
    trace_distance,
)
from .monitor import (
    ClassPartition,
    ClassSafetyResult,
    PredictionRecord,
    SafetyReport,
    ThresholdConfig,
    aggregate,
    analyze,
    correlate_reports,
    online_check,
    partition,
)
from .states import (
    DensityMatrix,
    StateVector,
    density_from_distribution,
    density_from_mixture,
    purity,
    validate_density,
)

__version__ = "0.1.0"

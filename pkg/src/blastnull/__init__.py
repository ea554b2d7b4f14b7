"""GLRT detection toolkit for bistatic sonar under multipath direct-blast interference.

Pipeline: build a transmit spectrum (`signalmodel`), synthesize received
pulses through a parametric multipath channel (`channel`), estimate
delays/amplitudes/noise (`estimation`), form blast-nulling GLRT
statistics (`detection`), get thresholds and probabilities from the
matching tail distributions (`tails`), and drive Monte Carlo experiments
from scenario files (`harness`, `cli`).
"""

from .channel import (
    ChannelRealization,
    LevelSpec,
    calibrate_levels,
    noise_bins,
    geometric_channel,
    path_image,
    synthesize,
)
from .detection import (
    KNOWN_NOISE,
    UNKNOWN_NOISE,
    DetectionReport,
    Projector,
    Statistic,
    blast_projector,
    decide,
    detector_null_params,
    detector_tail_probability,
    detector_threshold,
    make_report,
    statistic_known_noise,
    statistic_unknown_noise,
)
from .estimation import (
    JointEstimate,
    WrelaxConfig,
    block_inverse,
    estimate_amplitudes_h0,
    estimate_joint_h1,
    estimate_noise_h0,
    estimate_noise_h1,
    partition_delays,
    wrelax,
)
from .exceptions import (
    BlastnullError,
    CalibrationError,
    ConditioningError,
    ConvergenceWarning,
    DegenerateInputError,
    FrameError,
    ParameterError,
    PrecisionWarning,
    TruncationError,
)
from .harness import (
    CrossingPulse,
    ResultRow,
    Scenario,
    rows_to_csv,
    rows_to_json,
    run_crossing_demo,
    run_sweep,
)
from .config import load_scenario, scenario_from_dict
from .signalmodel import (
    PathSet,
    Spectrum,
    SteeringMatrix,
    Waveform,
    bistatic_doppler,
    generate_lfm,
    spectrum_of,
    steering_column,
    steering_matrix,
)
from .tails import (
    ChiSqParams,
    DncFParams,
    doubly_noncentral_f_sf,
    noncentral_chi2_sf,
    noncentrality_chi2,
    noncentrality_denominator,
    pd_theoretical,
    threshold_for_pfa,
)

__version__ = "0.1.0"

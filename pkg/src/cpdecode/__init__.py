"""cpdecode: online Bayesian decoding of continuous-pursuit kinematics from EEG.

The package turns multichannel recordings into per-packet bandpower
features, decodes 2-D cursor kinematics with an online Bayesian linear
model (isotropic or ARD prior, forgetting-factor adaptation) or a
closed-form ridge baseline, supports velocity- and acceleration-level
prediction modes, and scores everything with NMSE under a shared
calibration/evaluation protocol.
"""

__version__ = "0.1.0"

from .bayes import BayesDecoder, PriorSpec, SufficientStats, solve_map
from .data_io import (
    RunRecord,
    SynthConfig,
    export_streams,
    import_streams,
    load_run,
    prepare_run,
    synth_generate,
)
from .errors import CPDecodeError
from .evaluation import (
    ModelSpec,
    RunData,
    RunReport,
    aggregate,
    nmse,
    run_protocol,
    session_accumulative,
)
from .labels import (
    LabelStream,
    Trajectory,
    align_streams,
    build_labels,
    integrate_acceleration,
    resample_to_packets,
    to_acceleration,
)
from .ridge import RidgeModel, fit_ridge, predict_ridge
from .signal_pipeline import (
    DEFAULT_BANDS,
    BandSpec,
    PacketizerConfig,
    PacketStream,
    StandardizerState,
    bandpower,
    build_feature_streams,
    car,
    decimate,
    ems_standardize,
    packetize,
    welch_psd,
)

__all__ = [
    "__version__",
    "BayesDecoder",
    "PriorSpec",
    "SufficientStats",
    "solve_map",
    "RunRecord",
    "SynthConfig",
    "export_streams",
    "import_streams",
    "load_run",
    "prepare_run",
    "synth_generate",
    "CPDecodeError",
    "ModelSpec",
    "RunData",
    "RunReport",
    "aggregate",
    "nmse",
    "run_protocol",
    "session_accumulative",
    "LabelStream",
    "Trajectory",
    "align_streams",
    "build_labels",
    "integrate_acceleration",
    "resample_to_packets",
    "to_acceleration",
    "RidgeModel",
    "fit_ridge",
    "predict_ridge",
    "DEFAULT_BANDS",
    "BandSpec",
    "PacketizerConfig",
    "PacketStream",
    "StandardizerState",
    "bandpower",
    "build_feature_streams",
    "car",
    "decimate",
    "ems_standardize",
    "packetize",
    "welch_psd",
]

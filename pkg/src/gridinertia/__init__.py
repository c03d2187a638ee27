"""Power-system inertia estimation from ambient PMU measurements.

The package covers the full workflow:

- :mod:`gridinertia.grid` / :mod:`gridinertia.rts24` — network model and the
  IEEE RTS-24 test case;
- :mod:`gridinertia.simulate` — swing-equation simulator with active-power
  probing;
- :mod:`gridinertia.pipeline` / :mod:`gridinertia.bundle` — PMU sampling,
  windowing, noise, normalization, and the on-disk dataset format;
- :mod:`gridinertia.nn` — the small neural-network library (layers,
  optimizer, gradient checking, checkpoints);
- :mod:`gridinertia.models` — estimator families (dnn, cnn, lrcn, gcn),
  training loop, and metrics;
- :mod:`gridinertia.featselect` — greedy forward feature selection;
- :mod:`gridinertia.opp` — optimal PMU placement;
- :mod:`gridinertia.cli` — the ``gridinertia`` command.
"""

from .bundle import bundle_fingerprint, load_bundle, save_bundle
from .errors import (AssemblyError, BundleFormatError, CaseFormatError,
                     CheckpointFormatError, ConfigError, GridInertiaError,
                     PipelineError, PlacementError, SelectionError,
                     SimulationDiverged, SimulationError, TrainingDiverged)
from .featselect import greedy_forward_selection, make_dataset_scorer
from .features import ALL_FEATURES, FeatureId, parse_features
from .grid import (Branch, Bus, Generator, PowerSystem, load_case, save_case,
                   system_inertia)
from .models import (FAMILIES, Metrics, ModelSpec, TrainConfig, TrainResult,
                     build_model, evaluate, load_model, make_spec,
                     observed_adjacency, predict, regression_metrics,
                     save_model, train)
from .opp import (ObservabilityReport, Placement, ZgibSet, brute_force_opp,
                  detect_zgib, observability, solve_opp)
from .pipeline import Dataset, SimConfig, assemble_dataset
from .rts24 import build_ieee24
from .simulate import ProbingSignal, SimulationTrace, simulate

__version__ = "0.1.0"

__all__ = [
    "ALL_FEATURES", "AssemblyError", "BundleFormatError", "Bus",
    "CaseFormatError", "CheckpointFormatError", "ConfigError", "Dataset",
    "Branch", "FAMILIES", "FeatureId", "Generator", "GridInertiaError",
    "Metrics", "ModelSpec", "ObservabilityReport", "Placement",
    "PipelineError", "PlacementError", "PowerSystem", "ProbingSignal",
    "SelectionError", "SimConfig", "SimulationDiverged", "SimulationError",
    "SimulationTrace", "TrainConfig", "TrainResult", "TrainingDiverged",
    "ZgibSet", "__version__", "assemble_dataset", "brute_force_opp",
    "build_ieee24", "build_model", "bundle_fingerprint", "detect_zgib",
    "evaluate", "greedy_forward_selection", "load_bundle", "load_case",
    "load_model", "make_dataset_scorer", "make_spec", "observability",
    "observed_adjacency", "parse_features", "predict", "regression_metrics",
    "save_bundle", "save_case", "save_model", "simulate", "solve_opp",
    "system_inertia", "train",
]

"""Beam stiffness-damage detection from static FEM responses with LM-trained networks."""

from .dataset import (Dataset, DamageScenario, InputKind, NormalizationParams, Sample,
                      SamplerConfig, denormalize, fit_normalization, generate_dataset,
                      load_dataset, normalize, sample_scenario, save_dataset)
from .detect import DetectionReport, detect
from .errors import (BeamDetectError, DimensionMismatch, FormatError, InvalidConfig,
                     InvalidGeometry, SingularMatrix, UnsupportedCase)
from .experiments import VARIATIONS, ExperimentConfig, run_training
from .fem import (BeamSpec, StaticResponse, Support, apply_boundary_conditions,
                  assemble_global, element_stiffness, exact_cantilever_response,
                  nodal_strain, solve_static)
from .lm import StopReason, TrainConfig, TrainLog, lm_step, train
from .network import (NetworkArchitecture, NetworkWeights, forward, init_weights,
                      jacobian, network_mse)

__version__ = "0.1.0"

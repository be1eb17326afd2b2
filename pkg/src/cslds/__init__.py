"""Compressive acquisition and recovery of videos modeled as linear dynamical systems."""

from .acquisition import (BudgetReport, CompressiveStream, MeasurementPlan, acquire, innovation_budget,
                          input_snr, missing_pattern, noise_std_for_input_snr, pattern_input_snr)
from .errors import ConfigError, CSLDSError, DimensionError, FormatError, NumericalError
from .evaluation import (SubspaceDescriptor, nn_classify, procrustes_distance2, reconstruction_snr,
                         register, snr_db, state_snr)
from .kernels import BACKEND
from .lds import (LdsModel, StateSequence, VideoTensor, estimate_transition, fit_oracle,
                  is_observable, observability_matrix, synthesize)
from .recovery import RecoveredModel, RecoveryConfig, reconstruct_video, recover_observation
from .scenes import SceneSpec, generate_scene, random_system
from .state_estim import HankelMatrix, StateEstimate, build_hankel, complete_hankel, estimate_states
from .transforms import (MeasurementEnsemble, RowSampledFastOperator, SparsifyingBasis,
                         make_measurement_ensemble)

__version__ = "0.1.0"

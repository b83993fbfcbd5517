"""Band-limited signal estimation from nonuniform samples, with an RMS bound.

Includes its application to pilot-aided OFDM channel estimation and a TDL
least-squares baseline for comparison.
"""

__version__ = "0.1.0"

from .channel import (ChannelModelParams, PilotChannelEstimator, PilotGrid, PilotObservations,
                      SparseChannel, calibrate_sigma_a, channel_spectrum, denormalize_estimate,
                      draw_channel, normalize_to_unit_band, observe_pilots)
from .exceptions import DuplicateAbscissa, IdentifiabilityViolation, RankDeficient, SingularSystem
from .sinc import (EstimatorDesign, SampleVector, SincInterpolator, build_gram,
                   design_coefficients, error_bound, estimate, sinc)
from .tdl import TdlFit, TdlMLEstimator, TdlModelSpec, ml_fit, tdl_weights

__all__ = [
    "ChannelModelParams", "DuplicateAbscissa", "EstimatorDesign", "IdentifiabilityViolation",
    "PilotChannelEstimator", "PilotGrid", "PilotObservations", "RankDeficient", "SampleVector",
    "SincInterpolator", "SingularSystem", "SparseChannel", "TdlFit", "TdlMLEstimator",
    "TdlModelSpec", "build_gram", "calibrate_sigma_a", "channel_spectrum",
    "denormalize_estimate", "design_coefficients", "draw_channel", "error_bound", "estimate",
    "ml_fit", "normalize_to_unit_band", "observe_pilots", "sinc", "tdl_weights",
]

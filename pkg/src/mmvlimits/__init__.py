"""Performance limits of noisy multi-measurement-vector compressed sensing.

Replica free energy and MMSE, performance regions and thresholds, state
evolution, and AMP simulations on synthetic MMV and complex-CS channels.
"""

__version__ = "0.1.0"

from .model import DenoiserOutput, PriorParams, ProblemParams, denoise, mmse_scalar, sample_signal
from .quadrature import QuadratureError, radial_gaussian_expectation
from .replica import FreeEnergyProfile, free_energy, mmse, profile
from .se import SeTrace, bp_predicted_mse, se_fixed_point
from .phase import RegionLabel, ThresholdCurve, classify, phase_diagram, threshold, threshold_curve
from .sim import CovarianceEstimate, MeasurementEnsemble, Setting, empirical_v_covariance, generate
from .amp import AmpConfig, AmpResult, amp_run, amp_sweep

__all__ = [
    "AmpConfig", "AmpResult", "CovarianceEstimate", "DenoiserOutput", "FreeEnergyProfile",
    "MeasurementEnsemble", "PriorParams", "ProblemParams", "QuadratureError", "RegionLabel",
    "SeTrace", "Setting", "ThresholdCurve", "amp_run", "amp_sweep", "bp_predicted_mse",
    "classify", "denoise", "empirical_v_covariance", "free_energy", "generate", "mmse",
    "mmse_scalar", "phase_diagram", "profile", "radial_gaussian_expectation", "sample_signal",
    "se_fixed_point", "threshold", "threshold_curve",
]

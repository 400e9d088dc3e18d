"""Physical-layer security with frequency-switching arrays (FSA).

Steering and channel models, secrecy metrics, analytic null-steering
designs, a block-coordinate optimizer, comparison arrays and a small
experiment harness.
"""

from .baselines import fda_solve, fpa_solve, fsa_solve, ma_solve
from .bcd import OptimizerConfig, bcd_solve
from .model import ArrayGeometry, FrequencyPlan, Terminal, channel_bob, channel_eve, steering_vector
from .nullsteer import FrequencyLimits, GeometryGap, solve_null_steering
from .secrecy import Scenario, SecrecyReport, optimal_beamformer_rayleigh, secrecy_rate

__all__ = [
    "ArrayGeometry", "FrequencyPlan", "Terminal", "channel_bob", "channel_eve", "steering_vector",
    "Scenario", "SecrecyReport", "optimal_beamformer_rayleigh", "secrecy_rate",
    "FrequencyLimits", "GeometryGap", "solve_null_steering",
    "OptimizerConfig", "bcd_solve",
    "fpa_solve", "fda_solve", "fsa_solve", "ma_solve",
]

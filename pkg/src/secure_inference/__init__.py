"""Secure distributed inference simulations for networked sensors.

The main entry points are :func:`run_scenario` and :func:`run_monte_carlo`
(consensus+innovations estimation with adaptive-threshold detection), the
resilient consensus rules in :mod:`secure_inference.consensus`, and the
centralized detectors in :mod:`secure_inference.centralized`.
"""

from .config import ConfigError, load_config, make_config, resolve, save_config
from .estimator import EstimatorParams, Flag, choose_gains
from .harness import (CONVERGED, DETECTED, MISSED_AND_WRONG, emit_outputs, run_monte_carlo,
                      run_scenario, summarize)

__version__ = "0.1.0"

"""
Measurement-induced entanglement toolkit: Gaussian covariance dynamics under
monitoring and feedforward, a dense density-matrix oracle, and an experiment
harness that reproduces the published curves as CSV tables.
"""

__version__ = "0.1.0"

__all__ = [
    'gaussian_state',
    'gaussian_dynamics',
    'protocols',
    'dense_solver',
    'scenario_config',
    'presets',
    'harness',
    'sim_session',
    'plotting',
    'errors',
]

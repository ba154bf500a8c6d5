"""Biphoton generation by backward double-Lambda spontaneous four-wave mixing.

Typical use::

    from biphoton import PhysicalParams, FrequencyGrid, run_point
    sp, wp = run_point(PhysicalParams(od=10, omega_c=1, omega_d=1, delta_d=10,
                                      gamma21=0.001, delta_k_L=0.37 * 3.14159))
    wp.summary()
"""
from .atomic import (AtomicModel, CoupledModeCoefficients, DiffusionMatrix, DriftSystem,
                     SingularSystemError, SteadyState, assemble_drift, build_model,
                     coupled_mode_matrix, diffusion_matrix, steady_state)
from .detection import (ChannelModel, CoincidenceHistogram, analyze_histogram, expected_counts,
                        synthesize_histogram)
from .observables import (GridError, Spectra, Wavepacket, coincidence_rate, cross_correlation,
                          delay_time, run_point, signal_to_background, spectra, wavepacket)
from .params import (ConfigError, DetectionParams, FrequencyGrid, PhysicalParams, UnitSystem,
                     derived_times, from_config, load_config)
from .propagation import (GreensKernels, OscillationThresholdError, ScatteringMatrix,
                          greens_kernels, oracle_integrate, scattering_matrix)

__version__ = "0.1.0"

"""Simulator for a damped quantum oscillator in a thermal bosonic bath.

Layers: spectral (reservoir model and memory kernels), coefficients
(time-local generator tables and regime diagnostics), gaussian_qcf (exact
characteristic-function propagation), fock (truncated number-basis master
equation with positivity audits), mcwf (Monte Carlo unraveling in the
Lindblad-type regime), cli (config-driven experiments).
"""

from .spectral import ReservoirSpec, KernelSample  # noqa: F401
from .coefficients import (CoefficientTable, RegimeClass,  # noqa: F401
                           RegimeReport, RwaRates, build_coefficient_table,
                           classify_regime, rwa_rates, stationary_rates,
                           synthetic_table)
from .gaussian_qcf import (GaussianQcfState, PropagatorBundle,  # noqa: F401
                           SecularComparison, build_propagator_bundle,
                           coherent_state, moments, propagate_full,
                           propagate_secular, propagate_series,
                           secular_observable_check, thermal_state,
                           vacuum_state)
from .fock import (FockDensityMatrix, PositivityAudit,  # noqa: F401
                   audit_positivity, choose_truncation, coherent_density,
                   fock_density, heating_function, integrate_secular,
                   quadrature_moments, thermal_density, vacuum_density)
from .mcwf import (EnsembleEstimate, Trajectory, fock_vector,  # noqa: F401
                   run_ensemble, run_trajectory, vacuum_vector)

__version__ = "0.1.0"

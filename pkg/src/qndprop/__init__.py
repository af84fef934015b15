"""Propagators of QND system-reservoir Hamiltonians and their dense-matrix checks."""

from .core import (
    SPIN_DOWN,
    SPIN_UP,
    ConfigurationError,
    ConvergenceError,
    DimensionError,
    OscillatorBathSpec,
    QNDError,
    SpinBathSpec,
    SystemParams,
    Tolerances,
    TruncationError,
    ValidationError,
    coherent_overlap,
    validate_bath,
)
from .oscillator import (
    dephasing_factor,
    kernel_u1,
    kernel_u2,
    physical_matrix_element,
)
from .spin import exact_mode_propagator, kernel_u3, mode_propagator_series

__version__ = "0.1.0"

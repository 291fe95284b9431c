"""Squeezed-vacuum generation by polarization self-rotation: simulation and fitting."""

from .detection import (
    DetectionChain,
    ExcessNoiseModel,
    NoiseTrace,
    correct_to_cell_output,
    excess_noise,
    homodyne_noise,
    polarimeter_angle,
    sample_noise_trace,
    simulate_polarimeter,
)
from .errors import (
    ConfigError,
    DegenerateFitError,
    DegenerateStateError,
    InvalidParameterError,
    ModelInvalidError,
    UnphysicalObservationError,
)
from .estimation import FitResult, PolarimeterScan, fit_gl_polynomial, fit_noise_trace, squeezing_summary
from .gaussian_core import (
    GaussianState,
    add_isotropic_noise,
    apply_loss,
    min_max_variance,
    rotate,
    shear,
    to_db,
    vacuum,
    variance_at,
    wigner_grid,
)
from .medium import LineComponent, MediumModel, alpha_at, default_model, gl_at, propagate, self_rotation_angle

__version__ = "0.1.0"

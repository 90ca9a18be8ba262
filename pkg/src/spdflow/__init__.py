"""Curvature-driven flows for fields of 3 x 3 symmetric positive-definite matrices."""

from .geometry import (
    DomainError,
    christoffel,
    duplication_matrix,
    inner_product,
    inverse_metric_tensor,
    metric_determinant,
    metric_tensor,
    spd_check,
    unvech,
    vech,
)
from .immersion import (
    TensorField,
    beltrami_magnitude,
    channel_gradient,
    induced_metric,
    laplace_beltrami,
    mean_curvature,
)
from .metrics import ErrorReport, field_error, geodesic_distance, spd_violations, volume_energy
from .flows import FlowConfig, FlowDiagnostics, SPDViolationError, run_flow
from .fieldio import SyntheticSpec, add_noise, export_glyphs, generate_synthetic, read_field, write_field

__version__ = "0.1.0"

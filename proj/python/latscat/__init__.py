"""Far-field inverse scattering with latent shape codes.

Thin Python layer over the compiled ``_core`` extension. Arrays are numpy;
direction sets are ``N x 3`` with unit rows, far-field data ``L x M`` complex.
"""

from ._core import (
    AdamState,
    AnalyticFamily,
    ConfigError,
    ConfigMismatch,
    DimensionMismatch,
    IoError,
    IrregularSurface,
    LatscatError,
    NegativeDelta,
    NoConvergence,
    NonPositiveEpsilon,
    NonPositiveN,
    NoSurface,
    UnknownKind,
    adam_step,
    analytic_loss_and_gradient,
    far_field,
    fibonacci_directions,
    indicator_error_spheres,
    loss,
    mie_far_field,
    parse_run_config,
    phaseless_loss,
    read_far_field,
    reconstruct,
    schedule,
    simulate,
    sphere_surface,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"

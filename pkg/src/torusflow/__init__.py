"""torusflow: spectral construction and verification of forced Boussinesq
flows with intermittent convex-integration building blocks."""

from .fields import (SpectralField, TimeField, lq_norm, mixed_norm,
                     sobolev_norm, save_snapshot, load_snapshot)

__version__ = "0.1.0"

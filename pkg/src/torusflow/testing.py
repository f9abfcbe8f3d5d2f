"""Random band-limited inputs for operator verification."""

from __future__ import annotations

import numpy as np

from .fields import SpectralField, mode_grid
from .operators import leray_project, nonzero_modes

__all__ = ["random_field", "random_divfree"]


def random_field(rng: np.random.Generator, d: int, N: int, rank: int = 0,
                 band: int | None = None, mean_free: bool = True,
                 symmetric: bool = False) -> SpectralField:
    """Real random field with Fourier support in |n|_inf <= band.

    Built from grid white noise low-pass filtered to the requested band, so
    products of two such fields are alias-free at the working resolution
    whenever 2*band < N/2.
    """
    band = N // 6 if band is None else band
    shape = (d,) * rank + (N,) * d
    vals = rng.standard_normal(shape)
    f = SpectralField.from_values(d, N, vals)
    modes = mode_grid(d, N)
    keep = np.max(np.abs(modes), axis=0) <= band
    coef = f.coef * keep
    if symmetric and rank == 2:
        coef = 0.5 * (coef + np.swapaxes(coef, 0, 1))
    out = SpectralField(d, N, coef)
    if mean_free:
        out = nonzero_modes(out)
    # normalize to unit L2 for comparable tolerances
    scale = np.sqrt(np.sum(np.abs(out.coef) ** 2))
    return out / scale if scale > 0 else out


def random_divfree(rng: np.random.Generator, d: int, N: int,
                   band: int | None = None) -> SpectralField:
    v = random_field(rng, d, N, rank=1, band=band)
    out = leray_project(v)
    scale = np.sqrt(np.sum(np.abs(out.coef) ** 2))
    return out / scale if scale > 0 else out

"""Exponential integrating-factor IMEX stepper.

The stiff fractional dissipation is integrated exactly by the factor
exp(-|2 pi n|^{2 alpha} dt) per mode; the remaining terms are advanced with
Heun's predictor-corrector, giving a second-order scheme that is exact on
pure dissipation.
"""

from __future__ import annotations

import numpy as np

from .fields import SpectralField, wavevectors

__all__ = ["imex_evolve", "BlowupError"]


class BlowupError(RuntimeError):
    pass


def imex_evolve(fields0: list[SpectralField], alpha: float, t0: float, t1: float,
                n_steps: int, rhs, store_index=(), blowup_factor: float = 1e8):
    """Advance coupled fields with common dissipation (-Laplace)^alpha.

    rhs(t, fields) must return the explicit part as a list of coefficient
    arrays matching fields.  Returns (fields_final, stored) where stored maps
    step index -> list of SpectralFields for each index in store_index.
    """
    d, N = fields0[0].d, fields0[0].N
    k2 = np.sum(wavevectors(d, N) ** 2, axis=0)
    lam = np.where(k2 > 0, k2 ** alpha, 0.0)
    dt = (t1 - t0) / n_steps
    decay = np.exp(-lam * dt)
    coefs = [f.coef.copy() for f in fields0]
    scale0 = max(max(np.max(np.abs(c)) for c in coefs), 1e-30)
    store_index = set(int(i) for i in store_index)
    stored = {}
    if 0 in store_index:
        stored[0] = [SpectralField(d, N, c.copy()) for c in coefs]
    for step in range(n_steps):
        t = t0 + step * dt
        k1 = rhs(t, [SpectralField(d, N, c) for c in coefs])
        pred = [decay * (c + dt * f) for c, f in zip(coefs, k1)]
        k2_ = rhs(t + dt, [SpectralField(d, N, c) for c in pred])
        coefs = [decay * c + 0.5 * dt * (decay * f1 + f2)
                 for c, f1, f2 in zip(coefs, k1, k2_)]
        big = max(np.max(np.abs(c)) for c in coefs)
        if not np.isfinite(big) or big > blowup_factor * scale0 + blowup_factor:
            raise BlowupError(f"solution norm blew up at t={t + dt:.6g}")
        if (step + 1) in store_index:
            stored[step + 1] = [SpectralField(d, N, c.copy()) for c in coefs]
    return [SpectralField(d, N, c) for c in coefs], stored

"""Finite direction families with calibrated squared coefficients.

For a fixed finite set of integer directions k the family provides
coefficients Gamma_k with Gamma_k^2 affine (here: linear) in a symmetric
matrix argument and

    sum_k Gamma_k^2(M) e_k (x) e_k = M            for all symmetric M,

calibrated so the weights at the identity are equal and positive.  The
coefficients come from the Moore-Penrose pseudo-inverse of the dyad matrix,
which is the minimum-norm choice; positivity then persists on a Frobenius
ball of radius r0 around the identity, with floor c0^2 = half the identity
value.  A dual frame gamma_k plays the same role for vectors:
sum_k gamma_k(f) e_k = f.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np

__all__ = ["DirectionFamily", "build_direction_family"]

_DIRECTIONS = {
    2: [(1, 0), (0, 1), (1, 1), (1, -1)],
    3: [(1, 0, 0), (0, 1, 0), (0, 0, 1),
        (1, 1, 0), (1, -1, 0), (0, 1, 1),
        (0, 1, -1), (1, 0, 1), (1, 0, -1)],
}


def _transverse_basis(k: np.ndarray) -> np.ndarray:
    """Integer basis of the sublattice {n : n.k = 0}, shape (d-1, d)."""
    d = len(k)
    if d == 2:
        return np.array([[-k[1], k[0]]], dtype=np.int64)
    covol = np.linalg.norm(k)
    cands = [np.array(v) for v in itertools.product(range(-2, 3), repeat=3)
             if any(v) and np.dot(v, k) == 0]
    cands.sort(key=lambda v: (np.dot(v, v), tuple(v)))
    for m1, m2 in itertools.combinations(cands, 2):
        area = np.linalg.norm(np.cross(m1, m2))
        if abs(area - covol) < 1e-9:
            return np.stack([m1, m2])
    raise RuntimeError(f"no transverse basis found for direction {k}")


@dataclass(frozen=True)
class DirectionFamily:
    d: int
    directions: np.ndarray       # (K, d) integer direction vectors
    units: np.ndarray            # (K, d) normalized directions e_k
    weights: np.ndarray          # (K, d, d): Gamma_k^2(M) = <weights[k], M>
    dual: np.ndarray             # (K, d): gamma_k(f) = dual[k] . f
    transverse: np.ndarray       # (K, d-1, d) integer transverse bases
    c0_sq: float
    r0: float

    @property
    def size(self) -> int:
        return len(self.directions)

    def gamma_sq(self, M: np.ndarray) -> np.ndarray:
        """Gamma_k^2 of a symmetric matrix (field): (d,d,...) -> (K,...)."""
        return np.einsum("kij,ij...->k...", self.weights, M)

    def gamma(self, M: np.ndarray) -> np.ndarray:
        g2 = self.gamma_sq(M)
        if np.any(g2 < 0):
            raise ValueError("matrix argument outside the positivity ball")
        return np.sqrt(g2)

    def vector_coeffs(self, f: np.ndarray) -> np.ndarray:
        """gamma_k of a vector (field): (d,...) -> (K,...)."""
        return np.einsum("ki,i...->k...", self.dual, f)

    def to_manifest(self) -> str:
        payload = {
            "d": self.d,
            "directions": self.directions.tolist(),
            "weights": self.weights.tolist(),
            "dual": self.dual.tolist(),
            "transverse": self.transverse.tolist(),
            "c0_sq": self.c0_sq,
            "r0": self.r0,
        }
        return json.dumps(payload, indent=2, sort_keys=True)


def build_direction_family(d: int) -> DirectionFamily:
    if d not in _DIRECTIONS:
        raise ValueError("direction families are defined for d in {2, 3}")
    dirs = np.array(_DIRECTIONS[d], dtype=np.int64)
    K = len(dirs)
    units = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    # dyad matrix: columns vec(e_k e_k^T)
    U = np.stack([np.outer(e, e).ravel() for e in units], axis=1)  # (d^2, K)
    W = np.linalg.pinv(U)                                          # (K, d^2)
    weights = W.reshape(K, d, d)
    weights = 0.5 * (weights + np.swapaxes(weights, 1, 2))
    # calibration at the identity and positivity radius
    g_id = np.einsum("kij,ij->k", weights, np.eye(d))
    if np.any(g_id <= 0):
        raise RuntimeError("identity weights not positive")
    wnorm = np.linalg.norm(weights.reshape(K, -1), axis=1)
    r0 = float(np.min(g_id / (2.0 * wnorm)))
    c0_sq = float(np.min(g_id) / 2.0)
    dual = np.linalg.pinv(units).T                                 # (K, d)
    trans = np.stack([_transverse_basis(k) for k in dirs])
    return DirectionFamily(d=d, directions=dirs, units=units, weights=weights,
                           dual=dual, transverse=trans, c0_sq=c0_sq, r0=r0)

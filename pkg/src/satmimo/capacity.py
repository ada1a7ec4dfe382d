"""Eigenmode analysis and capacity of MIMO channel matrices."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "EigenProfile",
    "CnrSpec",
    "eigen_profile",
    "capacity",
    "optimal_capacity",
    "keyhole_capacity",
    "orthogonality_defect",
]


@dataclass(frozen=True)
class CnrSpec:
    rho: float
    reference_gain_sq: float = 1.0

    def __post_init__(self):
        if self.rho < 0:
            raise ValueError("rho must be non-negative")


@dataclass(frozen=True)
class EigenProfile:
    eigenvalues: np.ndarray
    trace: float
    condition_flag: str


def eigen_profile(h, rel_tol: float = 1e-6) -> EigenProfile:
    """Eigenvalues of ``H H^H`` from the singular values of ``H``.

    The flag is ``optimal`` when all eigenvalues are equal and ``keyhole``
    when only one is nonzero, each within ``rel_tol`` of the trace.
    """
    h = np.atleast_2d(np.asarray(h, dtype=complex))
    sv = np.linalg.svd(h, compute_uv=False)
    lam = sv**2
    trace = float(np.sum(lam))
    lam = np.where(lam < 1e-12 * max(trace, np.finfo(float).tiny), 0.0, lam)
    if trace == 0:
        flag = "keyhole"
    elif np.ptp(lam) <= rel_tol * trace:
        flag = "optimal"
    elif np.sum(lam[1:]) <= rel_tol * trace:
        flag = "keyhole"
    else:
        flag = "intermediate"
    return EigenProfile(lam, trace, flag)


def capacity(h, rho: float) -> float:
    """``log2 det(I + rho H H^H)`` in b/s/Hz, evaluated as a sum over eigenmodes."""
    lam = eigen_profile(h).eigenvalues
    return float(np.sum(np.log2(1.0 + rho * lam)))


def optimal_capacity(m: int, n: int, rho: float, gain_sq: float) -> float:
    u, v = min(m, n), max(m, n)
    return float(u * np.log2(1.0 + rho * v * gain_sq))


def keyhole_capacity(m: int, n: int, rho: float, gain_sq: float) -> float:
    return float(np.log2(1.0 + rho * m * n * gain_sq))


def orthogonality_defect(h) -> float:
    """Largest ``|cos|`` between rows (if rows <= cols) or columns of ``H``."""
    h = np.atleast_2d(np.asarray(h, dtype=complex))
    vecs = h if h.shape[0] <= h.shape[1] else h.T
    if vecs.shape[0] < 2:
        raise ValueError("need at least two vectors to test orthogonality")
    norms = np.linalg.norm(vecs, axis=1)
    if np.any(norms == 0):
        return 1.0
    unit = vecs / norms[:, None]
    g = np.abs(unit.conj() @ unit.T)
    np.fill_diagonal(g, 0.0)
    return float(min(g.max(), 1.0))

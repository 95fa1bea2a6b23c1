"""Domain types and direct (non-recursive) reference formulas.

Everything here is computed the slow, obvious way. The fast order-recursive
search in :mod:`ngpfbmp.recursive` is tested against these functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import linalg

from .errors import DomainError, RankDeficient

EPS_RANK = 1e-12


def as_support(indices: Iterable[int], N: int | None = None) -> tuple[int, ...]:
    """Normalize ``indices`` to a strictly increasing tuple (a support set)."""
    s = tuple(sorted(int(i) for i in indices))
    if len(set(s)) != len(s):
        raise DomainError(f"duplicate indices in support {s}")
    if s and s[0] < 0:
        raise DomainError(f"negative index in support {s}")
    if N is not None and s and s[-1] >= N:
        raise DomainError(f"index {s[-1]} out of range for N={N}")
    return s


@dataclass(frozen=True)
class ProblemInstance:
    """Observation ``y = phi @ x + n`` with white noise variance ``sigma2``
    and Bernoulli sparsity rate ``p``."""

    phi: np.ndarray
    y: np.ndarray
    sigma2: float
    p: float

    def __post_init__(self):
        phi = np.asarray(self.phi)
        y = np.asarray(self.y).reshape(-1)
        if phi.ndim != 2:
            raise DomainError("phi must be a 2-D matrix")
        if y.shape[0] != phi.shape[0]:
            raise DomainError(f"y has length {y.shape[0]}, expected M={phi.shape[0]}")
        if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(y))):
            raise DomainError("phi and y must be finite")
        if not self.sigma2 > 0:
            raise DomainError(f"sigma2 must be positive, got {self.sigma2}")
        _check_rate(self.p)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "y", y)

    @property
    def M(self) -> int:
        return self.phi.shape[0]

    @property
    def N(self) -> int:
        return self.phi.shape[1]


@dataclass(frozen=True)
class SparseSignal:
    values: np.ndarray
    support: tuple[int, ...]

    @classmethod
    def from_values(cls, values) -> "SparseSignal":
        values = np.asarray(values)
        return cls(values, tuple(int(i) for i in np.flatnonzero(values)))


def _check_rate(p: float) -> None:
    if not 0.0 < p < 1.0:
        raise DomainError(f"sparsity rate must lie in (0, 1), got {p}")


def embed(coef: np.ndarray, S: Sequence[int], N: int) -> np.ndarray:
    """Scatter the coefficients on ``S`` into a length-``N`` zero vector."""
    out = np.zeros(N, dtype=np.result_type(coef, np.complex128))
    out[list(S)] = coef
    return out


def blue_estimate(phi: np.ndarray, y: np.ndarray, S: Sequence[int]) -> np.ndarray:
    """Least-squares coefficients ``(Phi_S^H Phi_S)^{-1} Phi_S^H y``.

    Solved through a column-pivoted QR of ``Phi_S``; the squared diagonal of
    ``R`` is the pivot sequence of the Gram matrix. A pivot below
    ``EPS_RANK`` times the largest one raises :class:`RankDeficient`.
    """
    S = list(S)
    if not S:
        return np.zeros(0, dtype=np.result_type(phi, y, np.float64))
    if len(S) > phi.shape[0]:
        raise RankDeficient(f"|S|={len(S)} exceeds M={phi.shape[0]}")
    A = phi[:, S]
    Q, R, piv = linalg.qr(A, mode="economic", pivoting=True)
    pivots = np.abs(np.diag(R)) ** 2
    if pivots[-1] < EPS_RANK * pivots[0] or pivots[0] == 0.0:
        raise RankDeficient(f"support {tuple(S)} is numerically rank deficient")
    z = linalg.solve_triangular(R, Q.conj().T @ y)
    coef = np.empty_like(z)
    coef[piv] = z
    return coef


def projection_energy(phi: np.ndarray, y: np.ndarray, S: Sequence[int]) -> float:
    """``||Phi_S blue(S)||^2``, the energy of ``y`` captured by ``span(Phi_S)``."""
    S = list(S)
    if not S:
        return 0.0
    fit = phi[:, S] @ blue_estimate(phi, y, S)
    return float(np.vdot(fit, fit).real)


def residual_energy(phi: np.ndarray, y: np.ndarray, S: Sequence[int]) -> float:
    y_energy = float(np.vdot(y, y).real)
    return max(y_energy - projection_energy(phi, y, S), 0.0)


def log_support_prior(cardinality: int, p: float, N: int) -> float:
    """Log Bernoulli prior of any support with ``cardinality`` active entries."""
    _check_rate(p)
    if not 0 <= cardinality <= N:
        raise DomainError(f"cardinality {cardinality} outside [0, {N}]")
    return cardinality * math.log(p) + (N - cardinality) * math.log1p(-p)


def metric_direct(instance: ProblemInstance, S: Sequence[int]) -> float:
    """Dominant-support selection metric computed from scratch.

    ``nu(S) = (||P_S y||^2 - ||y||^2) / sigma2 + |S| ln p + (N - |S|) ln(1 - p)``
    """
    y_energy = float(np.vdot(instance.y, instance.y).real)
    xi = projection_energy(instance.phi, instance.y, S)
    return (xi - y_energy) / instance.sigma2 + log_support_prior(len(S), instance.p, instance.N)


def nmse(trials: Iterable[tuple[np.ndarray, np.ndarray]]) -> float:
    """Trial-averaged normalized squared error, in dB.

    Returns ``-inf`` when every estimate is exact.
    """
    ratios = []
    for x_true, x_hat in trials:
        x_true = np.asarray(x_true)
        denom = float(np.vdot(x_true, x_true).real)
        if denom == 0.0:
            raise DomainError("NMSE is undefined for an all-zero true signal")
        err = np.asarray(x_hat) - x_true
        ratios.append(float(np.vdot(err, err).real) / denom)
    if not ratios:
        raise DomainError("NMSE needs at least one trial")
    mean = sum(ratios) / len(ratios)
    if mean == 0.0:
        return -math.inf
    return 10.0 * math.log10(mean)

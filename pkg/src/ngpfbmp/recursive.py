"""Order-recursive evaluation of the selection metric.

After an O(MN) precompute, the metric of every one-column extension of the
current support costs O(k), and committing a column costs O(MN + kN): one
Gram row plus a block-inversion update of the per-candidate tables.

For the committed support ``S`` (stored in commit order) and each column
``i`` the state keeps

* ``Q[i]   = Phi_S^H phi_i``
* ``E[i]   = (Phi_S^H Phi_S)^{-1} Phi_S^H phi_i``
* ``f[i]   = phi_i^H phi_i - Q[i]^H E[i]``   (energy of phi_i outside span(Phi_S))
* ``r[i]   = phi_i^H y - Q[i]^H e_y``        (correlation of phi_i with the residual)

so that adding ``i`` raises the captured energy ``xi`` by ``|r[i]|^2 / f[i]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NearSingular, ZeroColumn
from .model import log_support_prior

EPS_F = 1e-10
ZERO_COLUMN = 1e-24


@dataclass
class PrecomputeCache:
    """Quantities that depend only on ``phi`` and ``y``; shared by all passes."""

    phi: np.ndarray
    y: np.ndarray
    phiH_y: np.ndarray
    col_energy: np.ndarray
    e_y1: np.ndarray
    y_energy: float
    _rows: dict = field(default_factory=dict, repr=False)

    @property
    def M(self) -> int:
        return self.phi.shape[0]

    @property
    def N(self) -> int:
        return self.phi.shape[1]

    def gram_row(self, i: int) -> np.ndarray:
        """``phi_i^H phi_j`` for every ``j``; computed once per index."""
        row = self._rows.get(i)
        if row is None:
            row = self._phiH @ self.phi[:, i]
            row = row.conj()
            row.setflags(write=False)
            self._rows[i] = row
        return row

    def gram(self, i: int, j: int) -> complex:
        return complex(self.gram_row(i)[j])

    def __post_init__(self):
        self._phiH = np.ascontiguousarray(self.phi.conj().T)


def precompute(phi: np.ndarray, y: np.ndarray) -> PrecomputeCache:
    phi = np.asarray(phi)
    y = np.asarray(y).reshape(-1)
    if phi.ndim != 2 or min(phi.shape) < 1:
        raise DomainError("phi must be a non-empty 2-D matrix")
    if y.shape[0] != phi.shape[0]:
        raise DomainError(f"y has length {y.shape[0]}, expected M={phi.shape[0]}")
    phi = phi.astype(np.complex128, copy=False)
    y = y.astype(np.complex128, copy=False)
    col_energy = np.einsum("ij,ij->j", phi.conj(), phi).real
    bad = np.flatnonzero(col_energy < ZERO_COLUMN)
    if bad.size:
        raise ZeroColumn(f"column {int(bad[0])} has (near) zero energy")
    phiH_y = phi.conj().T @ y
    return PrecomputeCache(
        phi=phi,
        y=y,
        phiH_y=phiH_y,
        col_energy=col_energy,
        e_y1=phiH_y / col_energy,
        y_energy=float(np.vdot(y, y).real),
    )


@dataclass
class RecursiveState:
    order: list[int]
    e_y: np.ndarray
    xi: float
    Q: np.ndarray
    E: np.ndarray
    f: np.ndarray
    r: np.ndarray
    col_energy: np.ndarray
    eps_f: float = EPS_F

    @property
    def k(self) -> int:
        return len(self.order)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(sorted(self.order))

    def coefficients(self) -> np.ndarray:
        """BLUE coefficients over :attr:`support` (increasing index order)."""
        perm = np.argsort(self.order, kind="stable")
        return self.e_y[perm]

    def gains(self) -> np.ndarray:
        """``|r_i|^2 / f_i`` for every column; ``-inf`` where not admissible."""
        ok = self.f >= self.eps_f * self.col_energy
        if self.order:
            ok[self.order] = False
        g = np.full(self.f.shape, -np.inf)
        g[ok] = (self.r[ok].real ** 2 + self.r[ok].imag ** 2) / self.f[ok]
        return g


def empty_state(cache: PrecomputeCache, capacity: int | None = None, eps_f: float = EPS_F) -> RecursiveState:
    """State for ``S = {}``; extending it by one column yields :func:`init_state`."""
    N = cache.N
    cap = max(int(capacity if capacity is not None else min(cache.M, N)), 1)
    return RecursiveState(
        order=[],
        e_y=np.zeros(0, dtype=np.complex128),
        xi=0.0,
        Q=np.zeros((N, cap), dtype=np.complex128),
        E=np.zeros((N, cap), dtype=np.complex128),
        f=cache.col_energy.copy(),
        r=cache.phiH_y.copy(),
        col_energy=cache.col_energy,
        eps_f=eps_f,
    )


def init_state(cache: PrecomputeCache, i0: int, capacity: int | None = None, eps_f: float = EPS_F) -> RecursiveState:
    return commit(empty_state(cache, capacity, eps_f), cache, i0)


def _check_candidate(state: RecursiveState, cache: PrecomputeCache, i: int) -> None:
    if not 0 <= i < cache.N:
        raise DomainError(f"index {i} out of range for N={cache.N}")
    if i in state.order:
        raise DomainError(f"index {i} is already in the support")
    if state.f[i] < state.eps_f * cache.col_energy[i]:
        raise NearSingular(f"column {i} lies numerically in the span of the support")


def candidate_metric(state: RecursiveState, cache: PrecomputeCache, i: int, sigma2: float, p: float) -> float:
    """Metric of ``S + {i}`` from the cached state, in O(1) given ``r`` and ``f``."""
    _check_candidate(state, cache, i)
    gain = abs(state.r[i]) ** 2 / state.f[i]
    return (state.xi + gain - cache.y_energy) / sigma2 + log_support_prior(state.k + 1, p, cache.N)


def state_metric(state: RecursiveState, cache: PrecomputeCache, sigma2: float, p: float) -> float:
    return (state.xi - cache.y_energy) / sigma2 + log_support_prior(state.k, p, cache.N)


def candidate_metrics(state: RecursiveState, cache: PrecomputeCache, sigma2: float, p: float) -> np.ndarray:
    """Vectorized :func:`candidate_metric` over all columns (``-inf`` if inadmissible)."""
    base = (state.xi - cache.y_energy) / sigma2
    prior = log_support_prior(state.k + 1, p, cache.N) if state.k + 1 <= cache.N else -math.inf
    return base + state.gains() / sigma2 + prior


def commit(state: RecursiveState, cache: PrecomputeCache, i_star: int) -> RecursiveState:
    """Append column ``i_star`` to the support, updating the state in place.

    The new column goes last in commit order. With ``rho = f[i_star]`` and
    ``c = r[i_star] / rho`` the block-inversion update is

        e_y  <- [e_y - c E[i_star], c]
        E[j] <- [E[j] - (g_j / rho) E[i_star], g_j / rho],
        g_j   = phi_{i_star}^H phi_j - Q[i_star]^H E[j]

    after which ``f`` and ``r`` are recomputed from ``Q`` and ``E``.
    """
    _check_candidate(state, cache, i_star)
    k = state.k
    if k >= state.Q.shape[1]:
        grow = max(k, 4)
        pad = np.zeros((state.Q.shape[0], grow), dtype=np.complex128)
        state.Q = np.hstack([state.Q, pad])
        state.E = np.hstack([state.E, pad.copy()])

    rho = float(state.f[i_star])
    c = state.r[i_star] / rho
    e_star = state.E[i_star, :k].copy()
    q_star = state.Q[i_star, :k].copy()

    state.e_y = np.append(state.e_y - c * e_star, c)
    state.xi += (state.r[i_star].real ** 2 + state.r[i_star].imag ** 2) / rho

    row = cache.gram_row(i_star)
    g = row - state.E[:, :k] @ q_star.conj()
    t = g / rho
    if k:
        state.E[:, :k] -= np.outer(t, e_star)
    state.E[:, k] = t
    state.Q[:, k] = row
    state.order.append(int(i_star))

    Qk = state.Q[:, : k + 1]
    Ek = state.E[:, : k + 1]
    proj = np.einsum("ij,ij->i", Qk.conj(), Ek).real
    f = cache.col_energy - proj
    if np.any(f < -1e-9 * cache.col_energy):
        raise NearSingular("negative Schur complement; support is numerically dependent")
    state.f = np.maximum(f, 0.0)
    state.r = cache.phiH_y - Qk.conj() @ state.e_y
    return state

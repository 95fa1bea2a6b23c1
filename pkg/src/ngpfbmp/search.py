"""Greedy dominant-support search and its repeated, level-exclusive variant."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy import special, stats

from .errors import DomainError, NearSingular
from .model import ProblemInstance, log_support_prior
from .recursive import EPS_F, PrecomputeCache, commit, empty_state, precompute

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SearchConfig:
    """Knobs of the greedy search.

    ``P=None`` derives the depth from ``(N, p, tail_prob)`` via
    :func:`compute_support_budget`.
    """

    P: int | None = None
    D: int = 5
    tail_prob: float = 1e-3
    eps_f: float = EPS_F
    include_empty: bool = False

    def __post_init__(self):
        if self.D < 1:
            raise DomainError(f"D must be >= 1, got {self.D}")
        if not 0.0 < self.tail_prob <= 0.5:
            raise DomainError(f"tail_prob must lie in (0, 0.5], got {self.tail_prob}")
        if self.P is not None and self.P < 1:
            raise DomainError(f"P must be >= 1, got {self.P}")

    def depth(self, M: int, N: int, p: float) -> int:
        if self.P is not None:
            return min(self.P, M, N)
        return compute_support_budget(N, p, self.tail_prob, M)


@dataclass
class DominantSet:
    """Distinct supports found by the search, with captured energies.

    ``xi[j]`` is ``||P_S y||^2`` for ``supports[j]``; the metric for any
    ``(sigma2, p)`` follows from it without redoing the search.
    ``coef[j]`` holds the least-squares coefficients on ``supports[j]``
    (increasing index order) as produced by the recursion, or ``None``
    when unknown.
    """

    supports: list[tuple[int, ...]] = field(default_factory=list)
    xi: list[float] = field(default_factory=list)
    nu: list[float] = field(default_factory=list)
    N: int = 0
    y_energy: float = 0.0
    coef: list[np.ndarray | None] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.supports)

    def __iter__(self):
        return iter(zip(self.supports, self.nu))

    def add(self, support: tuple[int, ...], xi: float, nu: float, coef: np.ndarray | None = None) -> bool:
        if support in self._index:
            return False
        self._index[support] = len(self.supports)
        self.supports.append(support)
        self.xi.append(float(xi))
        self.nu.append(float(nu))
        self.coef.append(coef)
        return True

    def __post_init__(self):
        self._index = {s: j for j, s in enumerate(self.supports)}
        if not self.coef:
            self.coef = [None] * len(self.supports)

    def rescored(self, sigma2: float, p: float) -> "DominantSet":
        """Same supports, metrics recomputed for new hyperparameters."""
        nu = [
            (xi - self.y_energy) / sigma2 + log_support_prior(len(s), p, self.N)
            for s, xi in zip(self.supports, self.xi)
        ]
        return DominantSet(list(self.supports), list(self.xi), nu, self.N, self.y_energy, list(self.coef))

    @classmethod
    def from_entries(cls, entries: Sequence[tuple[Sequence[int], float]], N: int = 0) -> "DominantSet":
        """Build from explicit ``(support, nu)`` pairs (energies unknown)."""
        ds = cls(N=N)
        for s, nu in entries:
            if not math.isfinite(nu):
                raise DomainError("metrics must be finite")
            ds.add(tuple(sorted(s)), math.nan, nu)
        return ds


def compute_support_budget(N: int, p: float, tail_prob: float = 1e-3, M: int | None = None) -> int:
    """Smallest search depth ``P`` with ``Pr(|S| > P)`` at most ``tail_prob``.

    Uses the Gaussian approximation of Binomial(N, p) when ``Np > 5`` and the
    exact binomial tail otherwise. The result is clamped to ``[1, min(M, N)]``.
    """
    if not 0.0 < p < 1.0:
        raise DomainError(f"sparsity rate must lie in (0, 1), got {p}")
    if not 0.0 < tail_prob <= 0.5:
        raise DomainError(f"tail_prob must lie in (0, 0.5], got {tail_prob}")
    mean = N * p
    if mean > 5:
        P = math.ceil(mean + math.sqrt(2 * mean * (1 - p)) * special.erfcinv(2 * tail_prob))
    else:
        P = int(stats.binom.isf(tail_prob, N, p))
        # isf can land one short of the bound through rounding
        while stats.binom.sf(P, N, p) > tail_prob:
            P += 1
    upper = N if M is None else min(M, N)
    return int(min(max(P, 1), upper))


class Level(NamedTuple):
    """One link of a greedy chain."""

    support: tuple[int, ...]
    nu: float
    xi: float
    added: int
    coef: np.ndarray


def greedy_pass(
    instance: ProblemInstance,
    cache: PrecomputeCache,
    config: SearchConfig,
    forbidden: Sequence[set[int]] | None = None,
    P: int | None = None,
) -> list[Level]:
    """One greedy chain ``S_1 < S_2 < ... < S_P``.

    ``forbidden[j]`` holds indices that may not be added at level ``j + 1``.
    Returns one :class:`Level` per step. The chain stops
    early when every candidate at a level is forbidden or numerically
    dependent on the support.

    Within one level all candidates share ``|S|``, so the argmax of the
    metric is the argmax of the energy gain ``|r|^2 / f`` alone; selecting
    on the gain keeps the chain exactly independent of ``sigma2`` and ``p``.
    """
    if P is None:
        P = config.depth(cache.M, cache.N, instance.p)
    state = empty_state(cache, capacity=P, eps_f=config.eps_f)
    chain = []
    for level in range(P):
        gains = state.gains()
        if forbidden is not None and level < len(forbidden) and forbidden[level]:
            gains[list(forbidden[level])] = -np.inf
        i_star = int(np.argmax(gains))
        if gains[i_star] == -np.inf:
            log.debug("greedy pass exhausted at level %d", level + 1)
            break
        try:
            commit(state, cache, i_star)
        except NearSingular:
            log.debug("greedy pass hit a singular update at level %d", level + 1)
            break
        nu = (state.xi - cache.y_energy) / instance.sigma2 + log_support_prior(state.k, instance.p, cache.N)
        chain.append(Level(state.support, nu, state.xi, i_star, state.coefficients()))
    return chain


def repeated_search(
    instance: ProblemInstance,
    cache: PrecomputeCache | None = None,
    config: SearchConfig = SearchConfig(),
) -> DominantSet:
    """``D`` greedy passes; pass ``d`` may not add, at level ``j``, any index
    that an earlier pass added at level ``j``."""
    if cache is None:
        cache = precompute(instance.phi, instance.y)
    P = config.depth(cache.M, cache.N, instance.p)
    forbidden: list[set[int]] = [set() for _ in range(P)]
    dominant = DominantSet(N=cache.N, y_energy=cache.y_energy)
    if config.include_empty:
        nu0 = -cache.y_energy / instance.sigma2 + log_support_prior(0, instance.p, cache.N)
        dominant.add((), 0.0, nu0, np.zeros(0, dtype=np.complex128))
    for _ in range(config.D):
        chain = greedy_pass(instance, cache, config, forbidden, P)
        for level, link in enumerate(chain):
            forbidden[level].add(link.added)
            dominant.add(link.support, link.xi, link.nu, link.coef)
        if not chain:
            break
    return dominant


def selected_sequence(instance: ProblemInstance, config: SearchConfig = SearchConfig()) -> list[list[int]]:
    """Indices added per level for every pass (diagnostics and invariance checks)."""
    cache = precompute(instance.phi, instance.y)
    P = config.depth(cache.M, cache.N, instance.p)
    forbidden: list[set[int]] = [set() for _ in range(P)]
    out = []
    for _ in range(config.D):
        chain = greedy_pass(instance, cache, config, forbidden, P)
        out.append([link.added for link in chain])
        for level, link in enumerate(chain):
            forbidden[level].add(link.added)
    return out

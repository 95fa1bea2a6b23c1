"""Posterior weighting, AMMSE / MAP assembly and hyperparameter bootstrap."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, EmptySet, RankDeficient
from .model import ProblemInstance, blue_estimate, embed
from .recursive import PrecomputeCache, precompute
from .search import DominantSet, SearchConfig, repeated_search

log = logging.getLogger(__name__)

P_CONVERGED = 0.02
MAX_ITER = 10


@dataclass
class RecoveryResult:
    x_ammse: np.ndarray
    x_map: np.ndarray
    s_map: tuple[int, ...]
    p_hat: float
    sigma2_hat: float
    dominant: DominantSet
    weights: np.ndarray
    iterations: int = 0
    converged: bool = True
    dropped: list[tuple[int, ...]] = field(default_factory=list)


def posterior_weights(dominant) -> np.ndarray:
    """Normalized ``exp(nu)`` over the dominant supports (log-sum-exp stable)."""
    nu = np.array([v for _, v in dominant], dtype=float)
    if nu.size == 0:
        raise EmptySet("dominant set is empty")
    if not np.all(np.isfinite(nu)):
        raise DomainError("metrics must be finite")
    w = np.exp(nu - nu.max())
    return w / w.sum()


def _support_coefficients(instance: ProblemInstance, dominant, j: int, support) -> np.ndarray:
    """Least-squares fit on ``support``: the one carried by the search if any, else a fresh solve."""
    coef = dominant.coef[j] if isinstance(dominant, DominantSet) else None
    if coef is None:
        coef = blue_estimate(instance.phi, instance.y, support)
    return coef


def ammse_estimate(
    instance: ProblemInstance, dominant: DominantSet, dropped: list | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Posterior-weighted mixture of per-support least-squares fits.

    Supports that turn out to be rank deficient are left out and the
    remaining weights renormalized; their identities are appended to
    ``dropped`` when given. Returns ``(x_ammse, weights)``, with zero weight
    on dropped supports.
    """
    N = instance.N
    entries = list(dominant)
    if not entries:
        raise EmptySet("dominant set is empty")
    weights = posterior_weights(dominant)
    x = np.zeros(N, dtype=np.complex128)
    total = 0.0
    for j, ((support, _), w) in enumerate(zip(entries, weights)):
        try:
            coef = _support_coefficients(instance, dominant, j, support)
        except RankDeficient:
            log.info("dropping rank-deficient support %s", support)
            if dropped is not None:
                dropped.append(support)
            continue
        x[list(support)] += w * coef
        total += w
    if total == 0.0:
        raise EmptySet("every dominant support was rank deficient")
    final = np.array(
        [0.0 if dropped and s in dropped else w for (s, _), w in zip(entries, weights)]
    )
    return x / total, final / final.sum()


def map_support(dominant) -> tuple[int, ...]:
    """Argmax of the metric; ties go to the smaller, then lexicographically first, support."""
    best = None
    for support, nu in dominant:
        key = (-nu, len(support), tuple(support))
        if best is None or key < best[0]:
            best = (key, tuple(support))
    if best is None:
        raise EmptySet("dominant set is empty")
    return best[1]


def map_estimate(instance: ProblemInstance, dominant) -> tuple[tuple[int, ...], np.ndarray]:
    s_map = map_support(dominant)
    j = [tuple(s) for s, _ in dominant].index(s_map)
    x_map = embed(_support_coefficients(instance, dominant, j, s_map), s_map, instance.N)
    return s_map, x_map


def noise_variance(phi: np.ndarray, y: np.ndarray, x: np.ndarray) -> float:
    """Mean-removed residual variance, normalized by ``M``, floored at ``1e-12 ||y||^2 / M``."""
    r = y - phi @ x
    M = y.shape[0]
    dev = r - r.mean()
    var = float(np.vdot(dev, dev).real) / M
    floor = 1e-12 * float(np.vdot(y, y).real) / M
    return max(var, floor)


def _clamp_rate(p: float, N: int) -> float:
    return min(max(p, 1.0 / N), 0.5)


@dataclass
class _Bootstrap:
    p_hat: float
    sigma2_hat: float
    s_map: tuple[int, ...]
    x_map: np.ndarray
    dominant: DominantSet
    iterations: int
    converged: bool
    depth: int


def _bootstrap(
    phi, y, cache: PrecomputeCache, config: SearchConfig, p_init: float,
    sigma2: float | None = None, p: float | None = None, max_iter: int = MAX_ITER,
) -> _Bootstrap:
    N = cache.N
    M = cache.M
    p_hat = p if p is not None else _clamp_rate(p_init, N)
    # While p is being estimated the noise level is held at ||y||^2 / M, an
    # upper bound on the true one: an overstated noise level keeps the MAP
    # support from absorbing noise-only columns, which would inflate p.
    s2_loop = sigma2 if sigma2 is not None else max(cache.y_energy / M, np.finfo(float).tiny)
    last_P = None
    dominant = None
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        instance = ProblemInstance(phi, y, s2_loop, p_hat)
        P = config.depth(M, N, p_hat)
        if dominant is None or P != last_P:
            dominant = repeated_search(instance, cache, config)
            last_P = P
        dominant = dominant.rescored(s2_loop, p_hat)
        s_map, x_map = map_estimate(instance, dominant)
        if p is not None:
            converged = True
            break
        p_next = _clamp_rate(np.count_nonzero(x_map) / N, N)
        change = abs(p_next - p_hat) / p_hat
        p_hat = p_next
        if change < P_CONVERGED:
            converged = True
            break
    if not converged:
        log.warning("sparsity-rate bootstrap did not converge in %d iterations", max_iter)
    s2 = sigma2 if sigma2 is not None else noise_variance(phi, y, x_map)
    return _Bootstrap(p_hat, s2, s_map, x_map, dominant, it, converged, last_P)


def estimate_hyperparameters(
    phi, y, p_init: float, config: SearchConfig = SearchConfig(),
    cache: PrecomputeCache | None = None, max_iter: int = MAX_ITER,
    sigma2: float | None = None,
) -> tuple[float, float, RecoveryResult]:
    """Alternate MAP support estimation and ``p <- ||x_map||_0 / N``.

    Stops once ``p`` moves by less than 2% (relative) or after ``max_iter``
    rounds. The noise variance is taken from the final MAP residual.
    """
    if not 0.0 < p_init < 1.0:
        raise DomainError(f"p_init must lie in (0, 1), got {p_init}")
    phi = np.asarray(phi)
    y = np.asarray(y).reshape(-1)
    if cache is None:
        cache = precompute(phi, y)
    b = _bootstrap(phi, y, cache, config, p_init, sigma2=sigma2, max_iter=max_iter)
    instance = ProblemInstance(phi, y, b.sigma2_hat, b.p_hat)
    dominant = b.dominant.rescored(b.sigma2_hat, b.p_hat)
    dropped: list = []
    x_ammse, weights = ammse_estimate(instance, dominant, dropped)
    result = RecoveryResult(
        x_ammse=x_ammse, x_map=b.x_map, s_map=b.s_map, p_hat=b.p_hat,
        sigma2_hat=b.sigma2_hat, dominant=dominant, weights=weights,
        iterations=b.iterations, converged=b.converged, dropped=dropped,
    )
    return b.p_hat, b.sigma2_hat, result


def _zero_result(N: int, p: float, sigma2: float) -> RecoveryResult:
    z = np.zeros(N, dtype=np.complex128)
    return RecoveryResult(z, z.copy(), (), p, sigma2, DominantSet(N=N), np.zeros(0))


def recover(
    phi,
    y,
    p: float | None = None,
    sigma2: float | None = None,
    p_init: float = 0.003,
    config: SearchConfig = SearchConfig(),
    max_iter: int = MAX_ITER,
) -> RecoveryResult:
    """Sparse recovery of ``x`` from ``y = phi @ x + n``.

    With both ``p`` and ``sigma2`` given this is one repeated search plus
    assembly. Otherwise the missing hyperparameters are bootstrapped from
    the data and the AMMSE mixture is weighted with the estimates, while
    the MAP support is the one the bootstrap settled on, so that
    ``p_hat == count_nonzero(x_map) / N`` at its fixed point.
    """
    phi = np.asarray(phi)
    y = np.asarray(y).reshape(-1)
    N = phi.shape[1]
    cache = precompute(phi, y)
    if cache.y_energy == 0.0:
        return _zero_result(N, p if p is not None else _clamp_rate(p_init, N), sigma2 or 0.0)

    iterations, converged = 0, True
    dominant = None
    b = None
    if p is None or sigma2 is None:
        b = _bootstrap(phi, y, cache, config, p_init, sigma2=sigma2, p=p, max_iter=max_iter)
        iterations, converged = b.iterations, b.converged
        p = b.p_hat if p is None else p
        sigma2 = b.sigma2_hat if sigma2 is None else sigma2
        if b.depth == config.depth(cache.M, N, p):
            dominant = b.dominant

    instance = ProblemInstance(phi, y, sigma2, p)
    if dominant is None:
        dominant = repeated_search(instance, cache, config)
    dominant = dominant.rescored(sigma2, p)

    dropped: list = []
    x_ammse, weights = ammse_estimate(instance, dominant, dropped)
    if b is not None:
        s_map, x_map = b.s_map, b.x_map
    else:
        s_map, x_map = map_estimate(instance, dominant)
    return RecoveryResult(
        x_ammse=x_ammse, x_map=x_map, s_map=s_map, p_hat=p, sigma2_hat=sigma2,
        dominant=dominant, weights=weights, iterations=iterations,
        converged=converged, dropped=dropped,
    )


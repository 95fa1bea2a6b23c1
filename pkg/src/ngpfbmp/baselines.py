"""Exhaustive MMSE/MAP oracle for tiny problems and an OMP baseline."""

from __future__ import annotations

import itertools

import numpy as np

from .errors import DomainError, RankDeficient, TooLarge
from .estimator import map_support, posterior_weights
from .model import ProblemInstance, SparseSignal, blue_estimate, embed, metric_direct

MAX_EXHAUSTIVE_N = 16


def _enumerate(instance: ProblemInstance, k_max: int):
    N = instance.N
    if N > MAX_EXHAUSTIVE_N:
        raise TooLarge(f"exhaustive enumeration is limited to N <= {MAX_EXHAUSTIVE_N}, got {N}")
    if k_max < 0:
        raise DomainError("k_max must be nonnegative")
    # supports wider than M are always rank deficient
    k_max = min(k_max, N, instance.M)
    for k in range(k_max + 1):
        for S in itertools.combinations(range(N), k):
            try:
                yield S, metric_direct(instance, S)
            except RankDeficient:
                continue


def exhaustive_mmse(instance: ProblemInstance, k_max: int) -> tuple[np.ndarray, dict]:
    """Posterior mean over every support of size ``<= k_max`` (the empty one included).

    Returns ``(x_mmse, {support: nu})``.
    """
    log_post = dict(_enumerate(instance, k_max))
    entries = list(log_post.items())
    w = posterior_weights(entries)
    x = np.zeros(instance.N, dtype=np.complex128)
    for (S, _), wS in zip(entries, w):
        if S:
            x[list(S)] += wS * blue_estimate(instance.phi, instance.y, S)
    return x, log_post


def exhaustive_map(instance: ProblemInstance, k_max: int) -> tuple[int, ...]:
    return map_support(list(_enumerate(instance, k_max)))


def omp_recover(
    phi: np.ndarray,
    y: np.ndarray,
    k_target: int | None = None,
    residual_tol: float | None = None,
) -> SparseSignal:
    """Orthogonal matching pursuit.

    Picks the column with the largest normalized correlation ``|phi_i^H r| / ||phi_i||``,
    refits least squares on the active set and stops after ``k_target``
    columns or once ``||r|| <= residual_tol ||y||``.
    """
    if k_target is None and residual_tol is None:
        raise DomainError("OMP needs k_target or residual_tol")
    if k_target is not None and k_target < 0:
        raise DomainError("k_target must be nonnegative")
    phi = np.asarray(phi)
    y = np.asarray(y).reshape(-1)
    M, N = phi.shape
    norms = np.linalg.norm(phi, axis=0)
    y_norm = np.linalg.norm(y)
    limit = min(M, N) if k_target is None else min(k_target, M, N)
    active: list[int] = []
    coef = np.zeros(0, dtype=np.complex128)
    r = y.astype(np.complex128)
    while len(active) < limit:
        r_norm = np.linalg.norm(r)
        if y_norm == 0.0 or (residual_tol is not None and r_norm <= residual_tol * y_norm):
            break
        corr = np.abs(phi.conj().T @ r) / norms
        corr[active] = -1.0
        i = int(np.argmax(corr))
        trial = sorted(active + [i])
        try:
            c = blue_estimate(phi, y, trial)
        except RankDeficient:
            break
        active, coef = trial, c
        r = y - phi[:, active] @ coef
    return SparseSignal.from_values(embed(coef, active, N)) if active else SparseSignal(
        np.zeros(N, dtype=np.complex128), ()
    )

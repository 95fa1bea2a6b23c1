"""Seeded synthetic problems: sensing matrices, Bernoulli-masked signals, noise."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError
from .model import SparseSignal

EPS_VAR = 1e-12


@dataclass(frozen=True)
class SignalModel:
    """Amplitude law for the active entries.

    ``gaussian_iid`` draws N(mu, var). ``uniform_noniid`` gives each active
    index its own mean in ``mu`` (a range) and variance in ``var`` (a range),
    then draws the amplitude uniformly on the interval with that mean and
    variance. ``custom_amplitudes`` calls ``sampler(rng, n)``.
    """

    kind: str = "gaussian_iid"
    mu: float | tuple[float, float] = 10.0
    var: float | tuple[float, float] = 2.0
    sampler: Callable[[np.random.Generator, int], np.ndarray] | None = None

    def __post_init__(self):
        if self.kind == "gaussian_iid":
            if not self.var > 0:
                raise DomainError("variance must be positive")
        elif self.kind == "uniform_noniid":
            lo, hi = self.var
            if not 0 < lo <= hi or self.mu[0] > self.mu[1]:
                raise DomainError("ranges must be ordered with positive variances")
        elif self.kind == "custom_amplitudes":
            if self.sampler is None:
                raise DomainError("custom_amplitudes needs a sampler")
        else:
            raise DomainError(f"unknown signal model {self.kind!r}")

    @classmethod
    def named(cls, name: str) -> "SignalModel":
        if name in ("gaussian", "gaussian_iid"):
            return cls("gaussian_iid", 10.0, 2.0)
        if name in ("uniform", "uniform_noniid"):
            return cls("uniform_noniid", (5.0, 10.0), (1.0, 2.0))
        raise DomainError(f"unknown signal model {name!r}")

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "gaussian_iid":
            return self.mu + math.sqrt(self.var) * rng.standard_normal(n)
        if self.kind == "uniform_noniid":
            means = rng.uniform(self.mu[0], self.mu[1], n)
            half = np.sqrt(3.0 * rng.uniform(self.var[0], self.var[1], n))
            return means + half * rng.uniform(-1.0, 1.0, n)
        return np.asarray(self.sampler(rng, n))


def gen_matrix(M: int, N: int, seed=None, real: bool = False) -> np.ndarray:
    """I.i.d. zero-mean Gaussian entries (circular complex unless ``real``), unit-norm columns."""
    if M < 1 or N < 1:
        raise DomainError("matrix dimensions must be positive")
    rng = np.random.default_rng(seed)
    if real:
        A = rng.standard_normal((M, N))
    else:
        A = (rng.standard_normal((M, N)) + 1j * rng.standard_normal((M, N))) / math.sqrt(2.0)
    return A / np.linalg.norm(A, axis=0)


def gen_signal(N: int, p: float, model: SignalModel = SignalModel(), seed=None) -> SparseSignal:
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"activation probability must lie in [0, 1], got {p}")
    rng = np.random.default_rng(seed)
    mask = rng.random(N) < p
    x = np.zeros(N, dtype=np.complex128)
    x[mask] = model.draw(rng, int(mask.sum()))
    return SparseSignal.from_values(x)


def add_noise(clean: np.ndarray, snr_db: float, seed=None, real: bool = False) -> tuple[np.ndarray, float]:
    """Add white Gaussian noise at ``snr_db`` relative to the realized energy of ``clean``.

    ``sigma2`` is the total per-entry noise variance (``E|n_i|^2``). An
    infinite SNR returns ``clean`` unchanged with ``sigma2 = 1e-12 ||clean||^2 / M``.
    """
    clean = np.asarray(clean)
    M = clean.shape[0]
    energy = float(np.vdot(clean, clean).real)
    if math.isinf(snr_db) and snr_db > 0:
        return clean.copy(), max(EPS_VAR * energy / M, np.finfo(float).tiny)
    if energy == 0.0:
        raise DomainError("cannot calibrate SNR against an all-zero signal")
    sigma2 = energy / (M * 10.0 ** (snr_db / 10.0))
    rng = np.random.default_rng(seed)
    if real:
        n = math.sqrt(sigma2) * rng.standard_normal(M)
    else:
        n = math.sqrt(sigma2 / 2.0) * (rng.standard_normal(M) + 1j * rng.standard_normal(M))
    return clean + n, sigma2


def trial_seeds(master_seed: int, *key: int) -> np.random.SeedSequence:
    """Sub-seed for one trial; depends only on ``(master_seed, key)``."""
    return np.random.SeedSequence(master_seed, spawn_key=tuple(int(k) for k in key))

"""Shared fixtures and independent reference computations for the test suite.

The oracles here deliberately avoid the package's own linear algebra: they
solve normal equations by Gaussian elimination with complete pivoting and
build orthogonal-complement projectors explicitly.
"""

import numpy as np
import pytest

from ngpfbmp.model import ProblemInstance


def random_complex(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_instance(M, N, seed, sigma2=0.1, p=0.05, unit_norm=True):
    rng = np.random.default_rng(seed)
    phi = random_complex(rng, M, N)
    if unit_norm:
        phi /= np.linalg.norm(phi, axis=0)
    y = random_complex(rng, M)
    return ProblemInstance(phi, y, sigma2, p)


def solve_complete_pivot(A, b):
    """Gaussian elimination with full (row and column) pivoting."""
    A = np.array(A, dtype=np.complex128)
    b = np.array(b, dtype=np.complex128)
    n = A.shape[0]
    cols = list(range(n))
    for k in range(n):
        sub = np.abs(A[k:, k:])
        r, c = np.unravel_index(np.argmax(sub), sub.shape)
        r += k
        c += k
        A[[k, r]] = A[[r, k]]
        b[[k, r]] = b[[r, k]]
        A[:, [k, c]] = A[:, [c, k]]
        cols[k], cols[c] = cols[c], cols[k]
        for i in range(k + 1, n):
            m = A[i, k] / A[k, k]
            A[i, k:] -= m * A[k, k:]
            b[i] -= m * b[k]
    z = np.zeros(n, dtype=np.complex128)
    for i in range(n - 1, -1, -1):
        z[i] = (b[i] - A[i, i + 1 :] @ z[i + 1 :]) / A[i, i]
    x = np.zeros(n, dtype=np.complex128)
    x[cols] = z
    return x


def normal_equation_solution(phi, y, S):
    A = phi[:, list(S)]
    return solve_complete_pivot(A.conj().T @ A, A.conj().T @ y)


def complement_projector(phi, S):
    M = phi.shape[0]
    if not S:
        return np.eye(M, dtype=np.complex128)
    A = phi[:, list(S)]
    G = A.conj().T @ A
    Ginv = np.column_stack([solve_complete_pivot(G, e) for e in np.eye(len(S))])
    return np.eye(M) - A @ Ginv @ A.conj().T


def oracle_residual(phi, y, S):
    r = complement_projector(phi, S) @ y
    return float(np.vdot(r, r).real)


def oracle_metric(instance, S):
    k = len(S)
    N = instance.N
    return (
        -oracle_residual(instance.phi, instance.y, S) / instance.sigma2
        + k * np.log(instance.p)
        + (N - k) * np.log1p(-instance.p)
    )


def rel_err(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    scale = max(np.max(np.abs(b)) if b.size else 0.0, 1e-300)
    return float(np.max(np.abs(a - b)) / scale) if a.size else 0.0


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# One line per acceptance criterion, filled in by test_acceptance.py and
# echoed at the end of the run.
ACCEPTANCE_LINES: list[str] = []


def report(criterion: int, passed: bool, detail: str) -> None:
    line = f"{'PASS' if passed else 'FAIL'} criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)

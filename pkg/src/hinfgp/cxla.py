"""
Dense complex Hermitian linear algebra.

Cholesky factorization with escalating diagonal jitter, triangular solves,
log-determinants, and the real (Re, Im) representation of a complex Gaussian
vector described by its Hermitian and complementary covariance matrices.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from hinfgp.errors import DimensionMismatch, FactorizationFailed, InvalidPair

#: number of tenfold jitter escalations tried after the unjittered attempt
JITTER_STEPS = 8
#: absolute Hermitian-symmetry tolerance
HERMITIAN_ATOL = 1e-12
#: eigenvalue floor for PSD checks
PSD_ATOL = 1e-8


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower Cholesky factor of ``M + jitter_used * I``."""

    lower: np.ndarray
    jitter_used: float = 0.0

    @property
    def n(self) -> int:
        return self.lower.shape[0]

    def reconstruct(self) -> np.ndarray:
        return self.lower @ self.lower.conj().T


def is_hermitian(m: np.ndarray, atol: float = HERMITIAN_ATOL) -> bool:
    m = np.asarray(m)
    return m.ndim == 2 and m.shape[0] == m.shape[1] and np.allclose(
        m, m.conj().T, rtol=0.0, atol=atol
    )


def cholesky(m, base_jitter: float = 1e-10) -> CholeskyFactor:
    """
    Cholesky factorization of a Hermitian matrix with jitter escalation.

    The unjittered matrix is tried first, then ``m + base_jitter * 10**t * I``
    for ``t = 0, ..., 8``. The first jitter that yields a factorization is
    recorded in the returned factor.

    Parameters
    ----------
    m : (n, n) array_like
        Hermitian matrix.
    base_jitter : float
        Smallest nonzero jitter to try.

    Raises
    ------
    FactorizationFailed
        If every jitter level fails, which means `m` is far from PSD.
    """
    m = np.atleast_2d(np.asarray(m, dtype=complex))
    if m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
    if base_jitter < 0:
        raise ValueError("base_jitter must be nonnegative")
    m = 0.5 * (m + m.conj().T)
    n = m.shape[0]
    if n == 0:
        return CholeskyFactor(np.zeros((0, 0), dtype=complex), 0.0)

    jitters = [0.0]
    if base_jitter > 0:
        jitters += [base_jitter * 10.0**t for t in range(JITTER_STEPS + 1)]
    eye = np.eye(n)
    for jitter in jitters:
        try:
            lower = np.linalg.cholesky(m + jitter * eye)
        except np.linalg.LinAlgError:
            continue
        if np.all(np.isfinite(lower)):
            return CholeskyFactor(lower, jitter)
    raise FactorizationFailed(
        f"matrix of size {n} is not positive definite even with jitter "
        f"{jitters[-1]:.3g}"
    )


def solve(f: CholeskyFactor, b) -> np.ndarray:
    """Solve ``(L L^H) x = b`` for a vector or a stack of column vectors."""
    b = np.asarray(b, dtype=complex)
    if b.shape[0] != f.n:
        raise DimensionMismatch(f"factor has size {f.n}, right-hand side {b.shape}")
    if f.n == 0:
        return b.copy()
    y = scipy.linalg.solve_triangular(f.lower, b, lower=True)
    return scipy.linalg.solve_triangular(f.lower.conj().T, y, lower=False)


def logdet(f: CholeskyFactor) -> float:
    """Log-determinant of the factored matrix."""
    return float(2.0 * np.sum(np.log(np.real(np.diag(f.lower)))))


def augmented_real(k, kt) -> np.ndarray:
    """
    Covariance of the stacked real vector ``(Re f_1..Re f_n, Im f_1..Im f_n)``.

    Parameters
    ----------
    k : (n, n) array_like
        Hermitian covariance ``E[f f^H]``.
    kt : (n, n) array_like
        Complementary covariance ``E[f f^T]``.

    Returns
    -------
    (2n, 2n) ndarray
        Blocks ``[[Kx, Kc], [Kc^T, Ky]]`` with ``Kx = Re(k + kt)/2``,
        ``Ky = Re(k - kt)/2`` and ``Kc = Im(kt - k)/2``.

    Raises
    ------
    InvalidPair
        If the result has an eigenvalue below ``-1e-8``.
    """
    k = np.atleast_2d(np.asarray(k, dtype=complex))
    kt = np.atleast_2d(np.asarray(kt, dtype=complex))
    if k.shape != kt.shape or k.shape[0] != k.shape[1]:
        raise DimensionMismatch(f"shapes {k.shape} and {kt.shape} do not match")
    kx = 0.5 * np.real(k + kt)
    ky = 0.5 * np.real(k - kt)
    kc = 0.5 * np.imag(kt - k)
    out = np.block([[kx, kc], [kc.T, ky]])
    out = 0.5 * (out + out.T)
    if out.size:
        scale = max(1.0, float(np.max(np.abs(np.diag(out)))))
        lam = np.linalg.eigvalsh(out)[0]
        if lam < -PSD_ATOL * scale:
            raise InvalidPair(
                f"(k, kt) is not a valid covariance pair: min eigenvalue {lam:.3g}"
            )
    return out

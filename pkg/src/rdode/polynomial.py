"""Characteristic polynomials and their roots for small dense matrices.

Coefficients come from the Faddeev-LeVerrier recurrence; roots from the
quadratic formula (degree <= 2) or Aberth-Ehrlich simultaneous iteration.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalFailure, RootFindingError, ValidationError

ROOT_TOL = 1e-10
ABERTH_MAX_ITER = 200
OVERFLOW_LIMIT = 1e100


@dataclass(frozen=True)
class CharPoly:
    """Monic polynomial ``lam^n + c[1] lam^(n-1) + ... + c[n]``; ``coeffs[0] == 1``."""

    coeffs: np.ndarray

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, z):
        return np.polyval(self.coeffs, z)

    def derivative(self, z):
        n = self.degree
        return np.polyval(self.coeffs[:-1] * np.arange(n, 0, -1), z)


def cofactor_det(A) -> float:
    """Determinant by Laplace expansion along the first row (for tiny matrices)."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if n == 0:
        return 1.0
    if n == 1:
        return float(A[0, 0])
    if n == 2:
        return float(A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0])
    total = 0.0
    for k in range(n):
        if A[0, k] == 0.0:
            continue
        minor = np.delete(np.delete(A, 0, axis=0), k, axis=1)
        total += (-1) ** k * A[0, k] * cofactor_det(minor)
    return total


def char_poly(matrix) -> CharPoly:
    A = np.asarray(matrix, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValidationError(f"char_poly needs a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValidationError("char_poly needs finite entries")
    if np.any(np.abs(A) > OVERFLOW_LIMIT):
        raise NumericalFailure("matrix entries exceed 1e100; coefficients would overflow")
    n = A.shape[0]
    coeffs = np.zeros(n + 1)
    coeffs[0] = 1.0
    M = np.zeros_like(A)
    eye = np.eye(n)
    for k in range(1, n + 1):
        M = A @ M + coeffs[k - 1] * eye
        coeffs[k] = -np.trace(A @ M) / k
    if n <= 4:
        det = cofactor_det(A)
        expected = (-1) ** n * det
        scale = max(1.0, float(np.max(np.abs(A)))) ** n
        if abs(coeffs[n] - expected) > 1e-9 * scale:
            raise NumericalFailure(
                f"Faddeev-LeVerrier constant term {coeffs[n]} disagrees with "
                f"cofactor determinant {expected}"
            )
        # the cofactor value is exact in more cases (integer matrices etc.)
        coeffs[n] = expected
    return CharPoly(coeffs)


def _quadratic_roots(b: float, c: float) -> list[complex]:
    """Roots of ``x^2 + b x + c`` without cancellation."""
    disc = b * b - 4.0 * c
    if disc >= 0:
        sq = math.sqrt(disc)
        q = -0.5 * (b + math.copysign(sq, b))
        if q == 0.0:
            return [0j, 0j]
        return [complex(q), complex(c / q)]
    sq = cmath.sqrt(disc)
    return [(-b + sq) / 2.0, (-b - sq) / 2.0]


def _aberth(coeffs: np.ndarray, tol: float, max_iter: int) -> np.ndarray:
    n = len(coeffs) - 1
    # initial circle: radius from the geometric mean of root magnitudes,
    # rotated off the real axis so conjugate pairs separate
    radius = abs(coeffs[-1]) ** (1.0 / n) if coeffs[-1] != 0 else 1.0
    radius = max(radius, 1.0 + float(np.max(np.abs(coeffs[1:]))) * 1e-3)
    centre = -coeffs[1] / n
    angles = 2 * np.pi * np.arange(n) / n + 0.4
    z = centre + radius * np.exp(1j * angles)
    dcoeffs = coeffs[:-1] * np.arange(n, 0, -1)
    for _ in range(max_iter):
        p = np.polyval(coeffs, z)
        dp = np.polyval(dcoeffs, z)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = p / dp
            diff = z[:, None] - z[None, :]
            np.fill_diagonal(diff, 1.0)
            inv = 1.0 / diff
            np.fill_diagonal(inv, 0.0)
            step = ratio / (1.0 - ratio * inv.sum(axis=1))
        step = np.where(np.isfinite(step), step, 0.0)
        # exact hits (p == 0) stay put
        step = np.where(p == 0, 0.0, step)
        z = z - step
        if np.all(np.abs(step) <= tol * (1.0 + np.abs(z))):
            break
    return z


def _sorted_roots(roots: np.ndarray) -> np.ndarray:
    """Descending real part, then descending imaginary part.

    Real parts are compared after rounding at ``1e-12`` of the root scale so
    the two members of a conjugate pair order the same way whichever of
    them came out an ulp larger.
    """
    scale = max(1.0, float(np.max(np.abs(roots))))
    key = np.round(roots.real / (1e-12 * scale))
    return roots[np.lexsort((-roots.imag, -key))]


def poly_roots(poly: CharPoly, tol: float = ROOT_TOL, max_iter: int = ABERTH_MAX_ITER) -> list[complex]:
    """All complex roots, sorted by descending real part.

    Raises
    ------
    RootFindingError
        If any residual ``|P(root)|`` exceeds ``tol * (1 + |coeffs|_inf)``
        after ``max_iter`` Aberth sweeps.
    """
    coeffs = np.asarray(poly.coeffs, dtype=float)
    n = len(coeffs) - 1
    if n < 1:
        raise ValidationError("poly_roots needs degree >= 1")
    if n == 1:
        roots = [complex(-coeffs[1])]
    elif n == 2:
        roots = _quadratic_roots(coeffs[1], coeffs[2])
    else:
        z = _aberth(coeffs, tol * 1e-3, max_iter)
        roots = [complex(r) for r in z]
    roots = np.array(roots, dtype=complex)
    # residual measured relative to the local magnitude of the polynomial terms
    mags = np.abs(roots)
    scale = np.polyval(np.abs(coeffs), mags)
    resid = np.abs(np.polyval(coeffs, roots))
    bound = tol * (1.0 + np.max(np.abs(coeffs))) * np.maximum(1.0, scale)
    if np.any(resid > bound):
        raise RootFindingError(
            f"root iteration did not converge in {max_iter} sweeps; residuals {resid}", resid)
    return [complex(r) for r in _sorted_roots(roots)]


def _cofactor_det_batch(A: np.ndarray) -> np.ndarray:
    """Laplace expansion along the first row for a stack ``A[..., n, n]``."""
    n = A.shape[-1]
    if n == 1:
        return A[..., 0, 0].copy()
    if n == 2:
        return A[..., 0, 0] * A[..., 1, 1] - A[..., 0, 1] * A[..., 1, 0]
    total = np.zeros(A.shape[:-2])
    rest = A[..., 1:, :]
    for k in range(n):
        minor = np.delete(rest, k, axis=-1)
        total = total + (-1) ** k * A[..., 0, k] * _cofactor_det_batch(minor)
    return total


def char_poly_batch(matrices) -> np.ndarray:
    """Characteristic coefficients for a stack ``(K, n, n)``; returns ``(K, n + 1)``.

    Same recurrence and determinant cross-check as :func:`char_poly`,
    applied to every matrix at once.
    """
    A = np.asarray(matrices, dtype=float)
    if A.ndim != 3 or A.shape[1] != A.shape[2]:
        raise ValidationError(f"char_poly_batch needs shape (K, n, n), got {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValidationError("char_poly_batch needs finite entries")
    if np.any(np.abs(A) > OVERFLOW_LIMIT):
        raise NumericalFailure("matrix entries exceed 1e100; coefficients would overflow")
    K, n, _ = A.shape
    coeffs = np.zeros((K, n + 1))
    coeffs[:, 0] = 1.0
    M = np.zeros_like(A)
    eye = np.eye(n)
    for k in range(1, n + 1):
        M = A @ M + coeffs[:, k - 1, None, None] * eye
        coeffs[:, k] = -np.trace(A @ M, axis1=1, axis2=2) / k
    if n <= 4:
        expected = (-1) ** n * _cofactor_det_batch(A)
        scale = np.maximum(1.0, np.max(np.abs(A), axis=(1, 2))) ** n
        bad = np.abs(coeffs[:, n] - expected) > 1e-9 * scale
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise NumericalFailure(
                f"Faddeev-LeVerrier constant term {coeffs[i, n]} disagrees with "
                f"cofactor determinant {expected[i]} (matrix {i})")
        coeffs[:, n] = expected
    return coeffs


def _aberth_batch(coeffs: np.ndarray, tol: float, max_iter: int) -> np.ndarray:
    """Aberth iteration on every row of ``coeffs`` simultaneously."""
    K, n1 = coeffs.shape
    n = n1 - 1
    last = np.abs(coeffs[:, -1])
    radius = np.where(last != 0, last ** (1.0 / n), 1.0)
    radius = np.maximum(radius, 1.0 + np.max(np.abs(coeffs[:, 1:]), axis=1) * 1e-3)
    centre = -coeffs[:, 1] / n
    angles = 2 * np.pi * np.arange(n) / n + 0.4
    z = centre[:, None] + radius[:, None] * np.exp(1j * angles)[None, :]
    dcoeffs = coeffs[:, :-1] * np.arange(n, 0, -1)
    active = np.ones(K, dtype=bool)
    off = ~np.eye(n, dtype=bool)
    for _ in range(max_iter):
        za = z[active]
        p = np.zeros_like(za)
        dp = np.zeros_like(za)
        for c in coeffs[active].T:
            p = p * za + c[:, None]
        for c in dcoeffs[active].T:
            dp = dp * za + c[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = p / dp
            diff = za[:, :, None] - za[:, None, :]
            inv = np.where(off, 1.0 / np.where(off, diff, 1.0), 0.0)
            step = ratio / (1.0 - ratio * inv.sum(axis=2))
        step = np.where(np.isfinite(step) & (p != 0), step, 0.0)
        za = za - step
        z[active] = za
        done = np.all(np.abs(step) <= tol * (1.0 + np.abs(za)), axis=1)
        idx = np.flatnonzero(active)
        active[idx[done]] = False
        if not active.any():
            break
    return z


def poly_roots_batch(coeffs, tol: float = ROOT_TOL, max_iter: int = ABERTH_MAX_ITER) -> np.ndarray:
    """Roots of every monic row of ``coeffs`` (shape ``(K, n + 1)``), each row sorted like :func:`poly_roots`."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.ndim != 2 or coeffs.shape[1] < 2:
        raise ValidationError("poly_roots_batch needs shape (K, n + 1) with n >= 1")
    K, n1 = coeffs.shape
    n = n1 - 1
    if n <= 2:
        roots = np.array([poly_roots(CharPoly(c), tol, max_iter) for c in coeffs], dtype=complex)
        return roots.reshape(K, n)
    roots = _aberth_batch(coeffs, tol * 1e-3, max_iter)
    mags = np.abs(roots)
    scale = np.zeros_like(mags)
    resid = np.zeros_like(roots)
    for c in coeffs.T:
        scale = scale * mags + np.abs(c)[:, None]
        resid = resid * roots + c[:, None]
    resid = np.abs(resid)
    bound = tol * (1.0 + np.max(np.abs(coeffs), axis=1))[:, None] * np.maximum(1.0, scale)
    if np.any(resid > bound):
        i = int(np.flatnonzero(np.any(resid > bound, axis=1))[0])
        raise RootFindingError(
            f"root iteration did not converge in {max_iter} sweeps for polynomial {i}; "
            f"residuals {resid[i]}", resid[i])
    return np.array([_sorted_roots(r) for r in roots])


def eigenvalues(matrix) -> list[complex]:
    A = np.asarray(matrix, dtype=float)
    if A.size == 0:
        return []
    return poly_roots(char_poly(A))


def spectral_abscissa(matrix) -> float:
    """Largest real part of the eigenvalues; ``-inf`` for an empty matrix."""
    ev = eigenvalues(matrix)
    if not ev:
        return -math.inf
    return max(r.real for r in ev)

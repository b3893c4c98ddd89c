"""Neumann cosine basis on the midpoint grid of ``(0, L)``.

Grid points are ``x_k = (k + 1/2) L / M``. A field is expanded as
``f(x) = c_0 + sum_{j>=1} c_j cos(j pi x / L)``. With ``N = M`` the
analysis/synthesis pair below is an exact inverse (a scaled DCT-II/DCT-III
pair); with ``N < M`` analysis is the discrete Galerkin projection.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from .errors import ValidationError


def midpoint_grid(M: int, L: float = 1.0) -> np.ndarray:
    if M < 1:
        raise ValidationError("grid needs at least one point")
    return (np.arange(M) + 0.5) * (L / M)


@lru_cache(maxsize=32)
def _cos_table(M: int, N: int) -> np.ndarray:
    k = np.arange(M) + 0.5
    j = np.arange(N)
    # reduce the integer phase mod 2M before scaling so large j stay accurate
    phase = np.mod(np.outer(2 * k, j), 4 * M) * (np.pi / (2 * M))
    table = np.cos(phase)
    table.setflags(write=False)
    return table


def cosine_table(M: int, N: int) -> np.ndarray:
    """``C[k, j] = cos(j pi x_k / L)``; independent of ``L``."""
    if N > M:
        raise ValidationError(f"need N <= M, got N = {N}, M = {M}")
    return _cos_table(int(M), int(N))


def analysis(values, N: int | None = None) -> np.ndarray:
    """Cosine coefficients of grid samples; acts on the last axis."""
    f = np.asarray(values, dtype=float)
    M = f.shape[-1]
    N = M if N is None else N
    c = f @ cosine_table(M, N) * (2.0 / M)
    c[..., 0] *= 0.5
    return c


def synthesis(coeffs, M: int) -> np.ndarray:
    """Grid samples of a cosine series; acts on the last axis."""
    c = np.asarray(coeffs, dtype=float)
    return c @ cosine_table(M, c.shape[-1]).T


def second_derivative(coeffs, L: float) -> np.ndarray:
    """Coefficients of ``f''`` for a cosine series."""
    c = np.asarray(coeffs, dtype=float)
    lam = (np.arange(c.shape[-1]) * np.pi / L) ** 2
    return -lam * c


def dominant_mode(coeffs) -> int:
    """``argmax_{j >= 1} |c_j|``."""
    c = np.asarray(coeffs)
    return int(np.argmax(np.abs(c[1:]))) + 1

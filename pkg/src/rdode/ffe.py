"""Far-from-equilibrium stationary patterns by branch switching.

The immobile component is slaved to a nullcline branch: ``u = phi(v, w)``
on ``Omega_1`` and ``u = psi(v, w)`` on ``Omega_2``. The diffusing
deviation ``nu = (v, w) - (v_bar, w_bar)`` solves the elliptic problem
``D nu'' + q(nu) = 0`` where ``q`` is ``q1`` or ``q2`` depending on the
subdomain, and is found as the fixed point of the Picard map

    nu <- (D d^2/dx^2 + A)^{-1} [ (A nu - q1(nu)) 1_{Omega_1} + (A nu - q2(nu)) 1_{Omega_2} ]

with ``A = grad q1(0)`` frozen at the constant steady state.
Fields are cosine series with ``N`` modes; nonlinear terms are evaluated on
the ``M``-point midpoint grid.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BranchDomainError, ContractionFailed, SingularModeError, ValidationError
from .models import jacobian, reaction_rates
from .receptor import BranchPair, ReceptorParams, branch_pair, steady_states
from .spectral import analysis, cosine_table, midpoint_grid, synthesis
from .stability import qssa_reduce

log = logging.getLogger(__name__)

SINGULAR_TOL = 1e-12
RESIDUAL_TOL = 1e-8
DIVERGENCE_LIMIT = 1e3


@dataclass(frozen=True)
class IntervalUnion:
    """Sorted disjoint open intervals inside ``(0, L)``."""

    intervals: tuple[tuple[float, float], ...] = ()
    length: float = 1.0

    def __post_init__(self):
        ivs = tuple(sorted((float(a), float(b)) for a, b in self.intervals))
        object.__setattr__(self, "intervals", ivs)
        for a, b in ivs:
            if not 0.0 <= a < b <= self.length:
                raise ValidationError(f"interval ({a}, {b}) is not inside (0, {self.length})")
        for (_, b0), (a1, _) in zip(ivs[:-1], ivs[1:]):
            if a1 < b0:
                raise ValidationError("intervals overlap")

    @property
    def measure(self) -> float:
        return sum(b - a for a, b in self.intervals)

    @property
    def empty(self) -> bool:
        return not self.intervals

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        inside = np.zeros(x.shape, dtype=bool)
        for a, b in self.intervals:
            inside |= (x > a) & (x < b)
        return inside

    def snapped(self, M: int) -> "IntervalUnion":
        """Endpoints moved to the nearest cell face ``k L / M`` of an ``M``-point midpoint grid.

        Any midpoint grid whose size is a multiple of ``M`` then sees exactly
        the same switching set.
        """
        h = self.length / M
        ivs = [(round(a / h) * h, round(b / h) * h) for a, b in self.intervals]
        ivs = [(a, b) for a, b in ivs if b > a]
        return IntervalUnion(tuple(ivs), self.length)

    @property
    def switch_points(self) -> list[float]:
        """Interval endpoints strictly inside the domain."""
        pts = []
        for a, b in self.intervals:
            pts += [p for p in (a, b) if 0.0 < p < self.length]
        return pts


def indicator_coefficients(omega2: IntervalUnion, L: float, N: int) -> np.ndarray:
    """Exact cosine coefficients of the indicator of ``omega2``."""
    c = np.zeros(N)
    c[0] = omega2.measure / L
    j = np.arange(1, N)
    for a, b in omega2.intervals:
        c[1:] += (2.0 / (j * np.pi)) * (np.sin(j * np.pi * b / L) - np.sin(j * np.pi * a / L))
    return c


@dataclass
class SpectralField:
    """Cosine coefficients ``coeffs[i, j]`` with a grid twin on ``M`` midpoints."""

    coeffs: np.ndarray
    M: int
    length: float = 1.0

    @property
    def N(self) -> int:
        return self.coeffs.shape[-1]

    @property
    def x(self) -> np.ndarray:
        return midpoint_grid(self.M, self.length)

    def grid(self) -> np.ndarray:
        return synthesis(self.coeffs, self.M)

    @classmethod
    def from_grid(cls, values, N: int, L: float = 1.0) -> "SpectralField":
        values = np.atleast_2d(np.asarray(values, dtype=float))
        return cls(analysis(values, N), values.shape[-1], L)

    def evaluate(self, x) -> np.ndarray:
        """Series value at arbitrary points."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        j = np.arange(self.N)
        return self.coeffs @ np.cos(np.outer(j, x) * np.pi / self.length)


def laplacian_eigenvalues(N: int, L: float) -> np.ndarray:
    return (np.arange(N) * np.pi / L) ** 2


def mode_inverses(A: np.ndarray, D: np.ndarray, L: float, N: int) -> np.ndarray:
    """``(A - lam_j D)^{-1}`` for ``j < N``; raises SingularModeError on a degenerate mode."""
    A = np.asarray(A, dtype=float)
    Dm = np.diag(np.asarray(D, dtype=float).ravel()) if np.ndim(D) == 1 else np.asarray(D, dtype=float)
    lam = laplacian_eigenvalues(N, L)
    mats = A[None, :, :] - lam[:, None, None] * Dm[None, :, :]
    dets = np.linalg.det(mats)
    scale = np.max(np.abs(mats), axis=(1, 2)) ** A.shape[0]
    bad = np.flatnonzero(np.abs(dets) < SINGULAR_TOL * np.maximum(scale, 1.0))
    if bad.size:
        j = int(bad[0])
        raise SingularModeError(f"A - lam_j D is singular at mode j = {j} (det = {dets[j]:.3e})", j)
    return np.linalg.inv(mats)


def resolvent_apply(A, D, rhs: SpectralField, L: float | None = None,
                    inverses: np.ndarray | None = None) -> SpectralField:
    """Solve ``D nu'' + A nu = rhs`` with Neumann ends, mode by mode."""
    L = rhs.length if L is None else L
    if inverses is None:
        inverses = mode_inverses(A, D, L, rhs.N)
    c = np.einsum("jab,bj->aj", inverses, rhs.coeffs)
    return SpectralField(c, rhs.M, L)


def forward_operator(A, D, fld: SpectralField) -> SpectralField:
    """``D nu'' + A nu`` in coefficient space."""
    lam = laplacian_eigenvalues(fld.N, fld.length)
    Dm = np.diag(np.asarray(D, dtype=float).ravel()) if np.ndim(D) == 1 else np.asarray(D, dtype=float)
    c = np.asarray(A) @ fld.coeffs - (Dm @ fld.coeffs) * lam[None, :]
    return SpectralField(c, fld.M, fld.length)


# ------------------------------------------------------------ branch clamp


def _smooth_overshoot(t: np.ndarray, delta: float) -> np.ndarray:
    """C^2 map of ``t >= 0`` onto ``[0, delta/2]``: identity to second order at 0, flat past ``delta``."""
    s = np.minimum(t, delta)
    return s - s ** 3 / delta ** 2 + s ** 4 / (2.0 * delta ** 3)


def clamp_v(v: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Smoothly confine ``v`` to ``[lo - lo/4, hi + (hi/2)/2]``; identity on ``[lo, hi]``.

    The slope blends to zero by a smoothstep over a band of width ``lo/2``
    below and ``hi/2`` above, so the clamped branch has bounded first and
    second derivatives.
    """
    v = np.asarray(v, dtype=float)
    out = v.copy()
    below = v < lo
    above = v > hi
    out[below] = lo - _smooth_overshoot(lo - v[below], 0.5 * lo)
    out[above] = hi + _smooth_overshoot(v[above] - hi, 0.5 * hi)
    return out


# ------------------------------------------------------------ the problem


@dataclass
class FFEProblem:
    params: ReceptorParams
    D: np.ndarray  # (D_v, D_w)
    omega2: IntervalUnion
    L: float = 1.0
    N: int = 256
    M: int = 1024
    branches: BranchPair = field(init=False)
    steady: np.ndarray = field(init=False)
    A: np.ndarray = field(init=False)
    inverses: np.ndarray = field(init=False)
    in2: np.ndarray = field(init=False)

    def __post_init__(self):
        self.D = np.asarray(self.D, dtype=float)
        if self.D.shape != (2,) or np.any(self.D <= 0):
            raise ValidationError("FFE needs two positive diffusion coefficients")
        if self.M < 4 * self.N:
            raise ValidationError(f"need M >= 4N for dealiasing, got N = {self.N}, M = {self.M}")
        if abs(self.omega2.length - self.L) > 1e-12:
            raise ValidationError("omega2 length does not match L")
        ss = steady_states(self.params)
        if ss.Xplus is None or not ss.plus_positive:
            raise ValidationError("no positive upper steady state; nothing to build on")
        self.steady = ss.Xplus
        self.branches = branch_pair(self.params)
        self.model = self.params.model(self.D[0], self.D[1], self.L)
        self.A = qssa_reduce(jacobian(self.model, self.steady))
        self.inverses = mode_inverses(self.A, self.D, self.L, self.N)
        self.x = midpoint_grid(self.M, self.L)
        self.in2 = self.omega2.contains(self.x)
        v_bar = self.steady[1]
        self.clamp = (0.5 * v_bar, 2.0 * v_bar)

    def u_of(self, v: np.ndarray, w: np.ndarray, clamp: bool = True) -> np.ndarray:
        vc = clamp_v(v, *self.clamp) if clamp else v
        u = self.branches.phi(vc, w)
        return np.where(self.in2, self.branches.psi(v, w), u)

    def q(self, nu: np.ndarray, clamp: bool = True) -> np.ndarray:
        """``(g, h)`` with ``u`` slaved to the branch of each grid point."""
        v = self.steady[1] + nu[0]
        w = self.steady[2] + nu[1]
        u = self.u_of(v, w, clamp)
        return reaction_rates(self.model, np.stack([u, v, w]))[1:]


def picard_map(state: SpectralField, problem: FFEProblem) -> SpectralField:
    """One application of the frozen-linearization Picard map."""
    nu = state.grid()
    rhs = problem.A @ nu - problem.q(nu)
    rc = SpectralField(analysis(rhs, state.N), state.M, problem.L)
    return resolvent_apply(problem.A, problem.D, rc, inverses=problem.inverses)


@dataclass
class FFEPattern:
    x: np.ndarray
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    coeffs: SpectralField  # deviation (v, w) - steady
    steady: np.ndarray
    omega2: IntervalUnion
    branch_map: np.ndarray  # True on Omega_2
    residuals: dict[str, float]
    iterations: int
    history: list[float]
    params: ReceptorParams
    D: np.ndarray
    L: float

    @property
    def N(self) -> int:
        return self.coeffs.N

    @property
    def M(self) -> int:
        return self.x.size

    def vw_at(self, x) -> np.ndarray:
        return self.steady[1:, None] + self.coeffs.evaluate(x)

    def jump_sizes(self) -> dict[float, float]:
        """``|phi(v, w) - psi(v, w)|`` at every branch-switch point."""
        br = branch_pair(self.params)
        out = {}
        for p in self.omega2.switch_points:
            v, w = self.vw_at([p])[:, 0]
            out[p] = float(abs(br.phi(v, w) - br.psi(v, w)))
        return out

    def field_on(self, M: int) -> np.ndarray:
        """``(u, v, w)`` on another midpoint grid; ``u`` re-slaved to the branches."""
        x = midpoint_grid(M, self.L)
        v, w = self.steady[1:, None] + synthesis(self.coeffs.coeffs, M)
        br = branch_pair(self.params)
        u = np.where(self.omega2.contains(x), br.psi(v, w), br.phi(v, w))
        return np.stack([u, v, w])

    def metadata(self) -> dict:
        return {
            "omega2": [list(iv) for iv in self.omega2.intervals],
            "measure": self.omega2.measure,
            "D_v": float(self.D[0]),
            "D_w": float(self.D[1]),
            "L": self.L,
            "N": self.N,
            "M": self.M,
            "iterations": self.iterations,
            "residuals": dict(self.residuals),
            "jumps": {f"{k:.17g}": v for k, v in self.jump_sizes().items()},
            "steady_state": self.steady.tolist(),
            "params": self.params.as_dict(),
        }


def stationary_residuals(problem: FFEProblem, c: np.ndarray) -> dict[str, float]:
    """Residuals of the stationary equations for deviation coefficients ``c``.

    ``r_v`` and ``r_w`` are sup norms of ``D_i (.)'' + F_i`` after projecting
    the reaction term onto the ``N`` retained modes, evaluated on the grid;
    ``r_f`` is the pointwise sup of ``f``.
    """
    nu = synthesis(c, problem.M)
    v = problem.steady[1] + nu[0]
    w = problem.steady[2] + nu[1]
    u = problem.u_of(v, w, clamp=False)
    F = reaction_rates(problem.model, np.stack([u, v, w]))
    lam = laplacian_eigenvalues(c.shape[-1], problem.L)
    proj = analysis(F[1:], c.shape[-1]) - problem.D[:, None] * lam[None, :] * c
    res = synthesis(proj, problem.M)
    return {
        "r_v": float(np.max(np.abs(res[0]))),
        "r_w": float(np.max(np.abs(res[1]))),
        "r_f": float(np.max(np.abs(F[0]))),
    }


def solve_ffe(problem: FFEProblem, tol: float = 1e-12, max_iter: int = 500,
              initial: SpectralField | None = None) -> FFEPattern:
    """Iterate the Picard map to a fixed point.

    Raises
    ------
    ContractionFailed
        On divergence or when ``max_iter`` is reached.
    BranchDomainError
        If the converged ``v`` leaves the clamp band or the nontrivial
        branch turns nonpositive somewhere on ``Omega_1``.
    """
    N, M = problem.N, problem.M
    c = np.zeros((2, N)) if initial is None else initial.coeffs.copy()
    state = SpectralField(c, M, problem.L)
    hist = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        new = picard_map(state, problem)
        diff = float(np.max(np.abs(new.coeffs - state.coeffs)))
        hist.append(diff)
        state = new
        if not math.isfinite(diff) or np.max(np.abs(new.coeffs)) > DIVERGENCE_LIMIT:
            raise ContractionFailed(
                f"contraction failed: Picard iterates diverged at iteration {it} "
                f"(|Omega_2| = {problem.omega2.measure:g}); shrink Omega_2 or increase diffusion")
        if diff < tol:
            converged = True
            break
    if not converged:
        raise ContractionFailed(
            f"contraction failed: no convergence in {max_iter} iterations "
            f"(last step {hist[-1]:.3e}, |Omega_2| = {problem.omega2.measure:g}); "
            f"shrink Omega_2 or increase diffusion")
    nu = state.grid()
    v = problem.steady[1] + nu[0]
    w = problem.steady[2] + nu[1]
    lo, hi = problem.clamp
    in1 = ~problem.in2
    if np.any(v[in1] < lo) or np.any(v[in1] > hi):
        raise BranchDomainError("converged v leaves the band where the branch is unclamped")
    if np.any(v[in1] <= problem.branches.crossing):
        raise BranchDomainError("nontrivial branch is nonpositive on part of Omega_1 "
                                f"(v <= 1/eta1 = {problem.branches.crossing:.4g})")
    u = problem.u_of(v, w, clamp=False)
    res = stationary_residuals(problem, state.coeffs)
    log.info("FFE converged in %d iterations, residuals %s", it, res)
    return FFEPattern(problem.x, u, v, w, state, problem.steady, problem.omega2, problem.in2.copy(),
                      res, it, hist, problem.params, problem.D, problem.L)


def construct(params: ReceptorParams, D_v: float, D_w: float, omega2, L: float = 1.0,
              N: int = 256, M: int = 1024, tol: float = 1e-12, max_iter: int = 500) -> FFEPattern:
    if not isinstance(omega2, IntervalUnion):
        omega2 = IntervalUnion(tuple(tuple(iv) for iv in omega2), L)
    return solve_ffe(FFEProblem(params, (D_v, D_w), omega2, L, N, M), tol, max_iter)

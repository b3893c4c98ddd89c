"""Per-mode spectra, Routh-Hurwitz tests and the DDI classifier."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import MechanismAbsent, TailCriterionError, ValidationError
from .models import JacobianBlocks, NeumannMode, neumann_eigenvalue
from .polynomial import (CharPoly, char_poly, char_poly_batch, poly_roots, poly_roots_batch,
                         spectral_abscissa)

DEGENERATE_TOL = 1e-9
DEFAULT_J_MAX = 256


class Verdict(str, Enum):
    NO_DDI_VOLTERRA_LYAPUNOV = "NoDDI_VolterraLyapunov"
    NO_DDI_ALL_STABLE = "NoDDI_AllStable"
    DDI_AUTOCATALYSIS = "DDI_Autocatalysis"
    DDI_J12 = "DDI_J12"
    DDI_J13 = "DDI_J13"
    DDI_J23 = "DDI_J23"
    DDI_COLLECTIVE = "DDI_Collective"
    NOT_STABLE_ODE = "NotStableODE"

    @property
    def is_ddi(self) -> bool:
        return self.value.startswith("DDI_")


@dataclass(frozen=True)
class ModeSpectrum:
    mode: int
    eigenvalue: float  # lambda_j of the Laplacian
    matrix: np.ndarray
    poly: CharPoly
    eigenvalues: tuple[complex, ...]

    @property
    def abscissa(self) -> float:
        return max(z.real for z in self.eigenvalues)


@dataclass(frozen=True)
class RHTriple:
    p1: float
    p2: float
    p3: float
    mu: float
    D_v: float
    D_w: float

    @property
    def hurwitz(self) -> float:
        """The second Hurwitz determinant ``p1 p2 - p3``."""
        return self.p1 * self.p2 - self.p3


@dataclass
class StabilityReport:
    s_ode: float
    submatrix_abscissae: dict[str, float]
    per_mode: list[ModeSpectrum]
    unstable_modes: list[int]
    verdict: Verdict
    unstable_submatrices: list[str] = field(default_factory=list)
    vl_matrix: np.ndarray | None = None
    bound: float = -math.inf
    attaining_mode: int | str | None = None
    marginal_modes: list[int] = field(default_factory=list)
    length: float = 1.0
    j_max: int = DEFAULT_J_MAX
    extras: dict = field(default_factory=dict)

    def to_dict(self, modes: str = "all") -> dict:
        """JSON-ready mapping. ``modes="unstable"`` trims the per-mode table."""
        table = []
        for ms in self.per_mode:
            if modes == "unstable" and ms.mode not in self.unstable_modes:
                continue
            table.append({
                "j": ms.mode,
                "lambda_j": ms.eigenvalue,
                "abscissa": ms.abscissa,
                "eigenvalues": [[z.real, z.imag] for z in ms.eigenvalues],
            })
        return {
            "verdict": self.verdict.value,
            "s_ode": self.s_ode,
            "submatrix_abscissae": dict(self.submatrix_abscissae),
            "unstable_submatrices": list(self.unstable_submatrices),
            "unstable_modes": list(self.unstable_modes),
            "marginal_modes": list(self.marginal_modes),
            "spectral_bound": self.bound,
            "attaining_mode": self.attaining_mode,
            "volterra_lyapunov_diagonal": None if self.vl_matrix is None else np.diag(self.vl_matrix).tolist(),
            "domain_length": self.length,
            "j_max": self.j_max,
            "per_mode": table,
            **self.extras,
        }


def _diag_vector(D, m: int) -> np.ndarray:
    D = np.asarray(D, dtype=float)
    if D.ndim == 2:
        if np.any(D - np.diag(np.diag(D))):
            raise ValidationError("diffusion matrix must be diagonal")
        D = np.diag(D)
    if D.shape != (m,):
        raise ValidationError(f"diffusion diagonal has shape {D.shape}, expected ({m},)")
    if np.any(D < 0):
        raise ValidationError("diffusion coefficients must be nonnegative")
    return D


def _check_partition(blocks: JacobianBlocks, D: np.ndarray):
    if np.any(D[: blocks.m_n] != 0):
        raise ValidationError("nondiffusive components must have exactly zero diffusion")


def diffusion_diagonal(blocks: JacobianBlocks, D_v, D_w) -> np.ndarray:
    dv = np.broadcast_to(np.atleast_1d(np.asarray(D_v, dtype=float)), (blocks.m_s,))
    dw = np.broadcast_to(np.atleast_1d(np.asarray(D_w, dtype=float)), (blocks.m_f,))
    return np.concatenate([np.zeros(blocks.m_n), dv, dw])


# ------------------------------------------------------------ Routh-Hurwitz


def _require_three(blocks: JacobianBlocks):
    if (blocks.m_n, blocks.m_s, blocks.m_f) != (1, 1, 1):
        raise ValidationError(
            f"Routh-Hurwitz triple needs partition (1, 1, 1), got "
            f"({blocks.m_n}, {blocks.m_s}, {blocks.m_f})")


def rh_triple(blocks: JacobianBlocks, D_v: float, D_w: float, mu: float) -> RHTriple:
    """Coefficients of ``det(lam I + mu D - J)`` for a one-one-one system."""
    _require_three(blocks)
    if mu < 0:
        raise ValidationError("mu must be nonnegative")
    B = mu * np.diag([0.0, D_v, D_w]) - blocks.J
    p1 = float(np.trace(B))
    p2 = float(sum(B[i, i] * B[k, k] - B[i, k] * B[k, i] for i, k in ((0, 1), (0, 2), (1, 2))))
    p3 = _det3(B)
    return RHTriple(p1, p2, p3, float(mu), float(D_v), float(D_w))


def _det3(B) -> float:
    return float(B[0, 0] * (B[1, 1] * B[2, 2] - B[1, 2] * B[2, 1])
                 - B[0, 1] * (B[1, 0] * B[2, 2] - B[1, 2] * B[2, 0])
                 + B[0, 2] * (B[1, 0] * B[2, 1] - B[1, 1] * B[2, 0]))


def rh_stable(triple: RHTriple) -> bool:
    return triple.p1 > 0 and triple.p3 > 0 and triple.hurwitz > 0


def rh_marginal(triple: RHTriple, tol: float = DEGENERATE_TOL) -> bool:
    return min(abs(triple.p1), abs(triple.p3), abs(triple.hurwitz)) < tol


def rh_triple_from_poly(poly: CharPoly) -> tuple[float, float, float]:
    if poly.degree != 3:
        raise ValidationError("Routh-Hurwitz triple is defined for cubics")
    return tuple(float(c) for c in poly.coeffs[1:])


# ------------------------------------------------------------ mode spectra


def mode_abscissa(blocks: JacobianBlocks, D, mode: NeumannMode) -> ModeSpectrum:
    D = _diag_vector(D, blocks.m)
    _check_partition(blocks, D)
    A = blocks.J - mode.eigenvalue * np.diag(D)
    poly = char_poly(A)
    roots = poly_roots(poly)
    return ModeSpectrum(mode.index, mode.eigenvalue, A, poly, tuple(roots))


def _tail_index(blocks: JacobianBlocks, D: np.ndarray, L: float) -> int | None:
    """First ``j`` with ``lambda_j > 2 |J|_inf / min positive D``."""
    pos = D[D > 0]
    if pos.size == 0:
        return None
    thresh = 2.0 * np.max(np.sum(np.abs(blocks.J), axis=1)) / pos.min()
    return int(math.floor(L * math.sqrt(thresh) / math.pi)) + 1


def tail_allowance(blocks: JacobianBlocks, D: np.ndarray, lam: float) -> float:
    """Perturbative remainder ``2 |J|_inf^2 / (lambda min D)`` of a tail mode."""
    pos = D[D > 0]
    if pos.size == 0 or lam == 0:
        return math.inf
    norm = np.max(np.sum(np.abs(blocks.J), axis=1))
    return 2.0 * norm ** 2 / (lam * pos.min())


def essential_abscissa(blocks: JacobianBlocks) -> float:
    return spectral_abscissa(blocks.J1) if blocks.m_n else -math.inf


def mode_spectra(blocks: JacobianBlocks, D, L: float, j_max: int) -> list[ModeSpectrum]:
    """Spectra of ``J - lambda_j D`` for ``j = 0..j_max``, all modes in one batch."""
    D = _diag_vector(D, blocks.m)
    _check_partition(blocks, D)
    lam = np.array([neumann_eigenvalue(j, L).eigenvalue for j in range(j_max + 1)])
    mats = blocks.J[None, :, :] - lam[:, None, None] * np.diag(D)[None, :, :]
    coeffs = char_poly_batch(mats)
    roots = poly_roots_batch(coeffs)
    return [ModeSpectrum(j, float(lam[j]), mats[j], CharPoly(coeffs[j]),
                         tuple(complex(z) for z in roots[j])) for j in range(j_max + 1)]


def check_tail(blocks: JacobianBlocks, D, L: float, spectra: list[ModeSpectrum]) -> None:
    """Raise TailCriterionError unless the modes beyond ``j_max`` are harmless."""
    D = _diag_vector(D, blocks.m)
    j_star = _tail_index(blocks, D, L)
    if j_star is None:
        return  # no diffusion: every mode equals mode 0
    last = spectra[-1]
    if last.mode < j_star:
        raise TailCriterionError(
            f"j_max = {last.mode} is below the tail index j* = {j_star}; raise j_max")
    s1 = essential_abscissa(blocks)
    if math.isinf(s1):
        ok = last.abscissa < 0
    else:
        ok = last.abscissa < s1 + DEGENERATE_TOL + tail_allowance(blocks, D, last.eigenvalue)
    if not ok:
        raise TailCriterionError(
            f"mode {last.mode} abscissa {last.abscissa:.3e} has not settled onto the "
            f"nondiffusive spectrum (s(J1) = {s1:.3e}); raise j_max")


def operator_spectral_bound(blocks: JacobianBlocks, D, L: float, j_max: int = DEFAULT_J_MAX,
                            tail: bool = True, spectra: list[ModeSpectrum] | None = None):
    """Spectral bound of ``D d^2/dx^2 + J`` on ``(0, L)`` with Neumann ends.

    Returns
    -------
    bound : float
        ``max(s(J1), max_j s(-lambda_j D + J))`` over ``j = 0..j_max``.
    attaining : int or "ode-part"
        Mode index attaining the bound, or ``"ode-part"`` when the
        nondiffusive block dominates.
    """
    if j_max < 1:
        raise ValidationError("j_max must be at least 1")
    D = _diag_vector(D, blocks.m)
    _check_partition(blocks, D)
    if spectra is None:
        spectra = mode_spectra(blocks, D, L, j_max)
    if tail:
        check_tail(blocks, D, L, spectra)
    absc = np.array([ms.abscissa for ms in spectra])
    j_best = int(np.argmax(absc))
    s1 = essential_abscissa(blocks) if np.any(D > 0) else -math.inf
    if s1 > absc[j_best]:
        return float(s1), "ode-part"
    return float(absc[j_best]), j_best


# ------------------------------------------------------- Volterra-Lyapunov


def _vl_objective(J: np.ndarray, logd: np.ndarray) -> float:
    M = np.diag(np.exp(logd - logd.mean()))
    S = J @ M + M @ J.T
    return float(np.linalg.eigvalsh(S)[-1]) / float(np.max(np.diag(M)))


def _negative_definite(S: np.ndarray) -> bool:
    """Leading principal minors of ``S`` alternate in sign, starting negative."""
    n = S.shape[0]
    for k in range(1, n + 1):
        minor = np.linalg.det(S[:k, :k])
        if not (-1) ** k * minor > 0:
            return False
    return True


def volterra_lyapunov_search(J, starts: int = 16, sweeps: int = 60, seed: int = 0) -> np.ndarray | None:
    """Heuristic search for a positive diagonal ``M`` with ``JM + MJ^T < 0``.

    Multi-start coordinate descent on the log-diagonal of ``M``. Returns
    the diagonal matrix when one is found and verified, else None; None
    does not prove that no such ``M`` exists.
    """
    J = np.asarray(J, dtype=float)
    n = J.shape[0]
    # diagonal stability passes to every principal submatrix, so an unstable
    # one rules it out before any search
    for size in range(1, n):
        for idx in itertools.combinations(range(n), size):
            if spectral_abscissa(J[np.ix_(idx, idx)]) >= 0:
                return None
    rng = np.random.default_rng(seed)
    candidates = [np.zeros(n)] + [rng.normal(0.0, 1.5, n) for _ in range(starts - 1)]
    for logd in candidates:
        logd = logd.copy()
        best = _vl_objective(J, logd)
        step = 1.0
        for _ in range(sweeps):
            if best < 0:
                break
            improved = False
            for i in range(n):
                for sign in (1.0, -1.0):
                    trial = logd.copy()
                    trial[i] += sign * step
                    val = _vl_objective(J, trial)
                    if val < best:
                        best, logd, improved = val, trial, True
                        break
            if not improved:
                step *= 0.5
                if step < 1e-6:
                    break
        if best < 0:
            M = np.diag(np.exp(logd - logd.mean()))
            if _negative_definite(J @ M + M @ J.T):
                return M
    return None


# -------------------------------------------------------------- classifier


SUBMATRIX_ORDER = ("J12", "J13", "J23")


def submatrix_abscissae(blocks: JacobianBlocks) -> dict[str, float]:
    out = {}
    for key in ("1", "2", "3", "12", "13", "23"):
        sub = blocks.sub(key)
        if sub.size:
            out["J" + key] = spectral_abscissa(sub)
    return out


def classify_ddi(blocks: JacobianBlocks, D_v, D_w, L: float, j_max: int = DEFAULT_J_MAX,
                 tail: bool = True) -> StabilityReport:
    """Classify diffusion-driven instability of a constant steady state.

    Precedence: ``NotStableODE`` if ``s(J) >= 0``; ``NoDDI_VolterraLyapunov``
    if a diagonal Lyapunov scaling is found; ``NoDDI_AllStable`` if no mode
    is unstable; otherwise the mechanism is named after the first unstable
    candidate in the order autocatalysis, J12, J13, J23, and
    ``DDI_Collective`` if none of them is unstable.
    """
    D = diffusion_diagonal(blocks, D_v, D_w)
    s_ode = spectral_abscissa(blocks.J)
    subs = submatrix_abscissae(blocks)
    spectra = mode_spectra(blocks, D, L, j_max)
    unstable = [ms.mode for ms in spectra if ms.abscissa > 0]
    marginal = [ms.mode for ms in spectra if abs(ms.abscissa) < DEGENERATE_TOL]
    bound, attaining = operator_spectral_bound(blocks, D, L, j_max, tail=tail, spectra=spectra)
    unstable_subs = [k for k in ("J1",) + SUBMATRIX_ORDER if subs.get(k, -math.inf) > 0]
    report = StabilityReport(
        s_ode=s_ode, submatrix_abscissae=subs, per_mode=spectra, unstable_modes=unstable,
        verdict=Verdict.NO_DDI_ALL_STABLE, unstable_submatrices=unstable_subs,
        bound=bound, attaining_mode=attaining, marginal_modes=marginal, length=L, j_max=j_max,
    )
    if s_ode >= 0:
        report.verdict = Verdict.NOT_STABLE_ODE
        return report
    M = volterra_lyapunov_search(blocks.J)
    if M is not None:
        report.vl_matrix = M
        report.verdict = Verdict.NO_DDI_VOLTERRA_LYAPUNOV
        return report
    s1 = subs.get("J1", -math.inf)
    if not unstable and not s1 > 0:
        report.verdict = Verdict.NO_DDI_ALL_STABLE
        return report
    if s1 > 0:
        report.verdict = Verdict.DDI_AUTOCATALYSIS
    elif unstable_subs:
        report.verdict = Verdict("DDI_" + unstable_subs[0])
    else:
        if blocks.m == 3:
            raise AssertionError(
                "collective DDI is impossible for three components; "
                "the unstable mode must be marginal")
        report.verdict = Verdict.DDI_COLLECTIVE
    return report


# ---------------------------------------------------------- threshold laws


def _three_dets(blocks: JacobianBlocks):
    _require_three(blocks)
    J = blocks.J
    return (float(J[0, 0]), float(np.linalg.det(blocks.J12)),
            float(np.linalg.det(blocks.J13)), _det3(J))


def small_Dv_threshold(blocks: JacobianBlocks, D_w: float, L: float,
                       j_max: int = DEFAULT_J_MAX) -> tuple[float, int]:
    """Largest slow diffusion ``eps`` below which ``p3(lambda_j) < 0`` for some mode.

    For each ``j >= 1`` the per-mode threshold is
    ``(det J - det J12 D_w lam) / (lam (det J13 - J1 D_w lam))``; only
    modes with a positive numerator and denominator contribute.

    Returns
    -------
    (eps, j) : the supremum and the mode attaining it.
    """
    J1, d12, d13, dJ = _three_dets(blocks)
    if spectral_abscissa(blocks.J) >= 0:
        raise ValidationError("small-D_v threshold needs a stable Jacobian")
    if not d12 < 0:
        raise MechanismAbsent(f"mechanism absent: det J12 = {d12:.4g} is not negative")
    best, best_j = -math.inf, None
    for j in range(1, j_max + 1):
        lam = (j * math.pi / L) ** 2
        num = dJ - d12 * D_w * lam
        den = lam * (d13 - J1 * D_w * lam)
        if num > 0 and den > 0 and num / den > best:
            best, best_j = num / den, j
    if best_j is None:
        raise MechanismAbsent(f"mechanism absent: no positive threshold term up to j = {j_max}")
    return best, best_j


@dataclass(frozen=True)
class LargeDwRequirement:
    L_min: float
    Dw_min: float
    mode: int
    length: float


def large_Dw_requirements(blocks: JacobianBlocks, D_v: float, j: int, L: float) -> LargeDwRequirement:
    """Domain length and fast diffusion that destabilise mode ``j``.

    ``L_min = pi j sqrt(J1 D_v / det J12)``; the fast-diffusion bound
    ``(det J - det J13 D_v lam_j) / (lam_j (det J12 - J1 D_v lam_j))``
    depends on ``lam_j = (j pi / L)^2`` and so is evaluated at the given
    ``L``, which must exceed ``L_min``.
    """
    J1, d12, d13, dJ = _three_dets(blocks)
    if spectral_abscissa(blocks.J) >= 0:
        raise ValidationError("large-D_w requirements need a stable Jacobian")
    ratio = J1 * D_v / d12 if d12 != 0 else -math.inf
    if not ratio > 0:
        raise MechanismAbsent(f"ratio J1 D_v / det J12 = {ratio:.4g} is not positive")
    L_min = math.pi * j * math.sqrt(ratio)
    if not L > L_min:
        raise ValidationError(f"L = {L} does not exceed L_min = {L_min:.6g} for mode {j}")
    lam = (j * math.pi / L) ** 2
    Dw_min = (dJ - d13 * D_v * lam) / (lam * (d12 - J1 * D_v * lam))
    return LargeDwRequirement(L_min, Dw_min, j, L)


def qssa_reduce(blocks: JacobianBlocks) -> np.ndarray:
    """Jacobian of the diffusive subsystem after eliminating the immobile block.

    Setting the nondiffusive equations to quasi-steady state gives the Schur
    complement ``J23 - J[23, 1] J1^{-1} J[1, 23]``.
    """
    if blocks.m_n == 0:
        return blocks.J23.copy()
    n = blocks.m_n
    J = blocks.J
    J1 = J[:n, :n]
    if abs(np.linalg.det(J1)) < DEGENERATE_TOL:
        raise ValidationError("nondiffusive block is singular; quasi-steady state undefined")
    return J[n:, n:] - J[n:, :n] @ np.linalg.solve(J1, J[:n, n:])


def hurwitz_polynomial(blocks: JacobianBlocks, D_v: float, D_w: float) -> np.ndarray:
    """Coefficients (highest power first) of ``p1(mu) p2(mu) - p3(mu)`` as a cubic in ``mu``.

    Obtained by exact interpolation through four sample points, since the
    expression has degree three in ``mu``.
    """
    mus = np.array([0.0, 1.0, 2.0, 3.0])
    vals = [rh_triple(blocks, D_v, D_w, m).hurwitz for m in mus]
    return np.polyfit(mus, vals, 3)


def unstable_mu_intervals(blocks: JacobianBlocks, D_v: float, D_w: float) -> list[tuple[float, float]]:
    """Open intervals of ``mu >= 0`` on which ``p1 p2 - p3 < 0``."""
    coeffs = hurwitz_polynomial(blocks, D_v, D_w)
    coeffs = coeffs[np.argmax(np.abs(coeffs) > 1e-14 * np.max(np.abs(coeffs))):]
    roots = []
    if len(coeffs) > 1:
        lead = coeffs[0]
        poly = CharPoly(np.asarray(coeffs) / lead)
        roots = sorted(z.real for z in poly_roots(poly) if abs(z.imag) < 1e-9 and z.real > 0)
    edges = [0.0] + roots + [math.inf]
    out = []
    for a, b in zip(edges[:-1], edges[1:]):
        probe = a + 1.0 if math.isinf(b) else 0.5 * (a + b)
        if rh_triple(blocks, D_v, D_w, probe).hurwitz < 0:
            out.append((a, b))
    return out

"""Turing-unstable regions in the diffusion plane and parameter feasibility masks."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import contourpy
import numpy as np

from .errors import ValidationError
from .models import JacobianBlocks
from .polynomial import spectral_abscissa
from .receptor import ReceptorParams
from .stability import _require_three

PARAM_NAMES = ("m1", "m2", "m3", "mu1", "mu2", "mu3")


def log_axis(lo: float = 1e-4, hi: float = 1.0, n: int = 200) -> np.ndarray:
    return np.geomspace(lo, hi, n)


@dataclass
class RegionGrid:
    """Per-cell sets of unstable modes on a ``(D_v, D_w)`` lattice.

    ``mask[i, k, j - 1]`` is True when mode ``j`` is unstable at
    ``(dv_axis[i], dw_axis[k])``; ``indicator`` holds
    ``min(p3, p1 p2 - p3)`` with the same layout.
    """

    dv_axis: np.ndarray
    dw_axis: np.ndarray
    mask: np.ndarray
    indicator: np.ndarray
    mode_cap: int
    length: float
    log_scale: bool = True

    def modes(self, i: int, k: int) -> set[int]:
        return {int(j) + 1 for j in np.flatnonzero(self.mask[i, k])}

    def cell_index(self, dv: float, dw: float) -> tuple[int, int]:
        """Nearest lattice cell (in log distance when the axes are logarithmic)."""
        f = np.log if self.log_scale else (lambda a: a)
        return (int(np.argmin(np.abs(f(self.dv_axis) - f(dv)))),
                int(np.argmin(np.abs(f(self.dw_axis) - f(dw)))))

    @property
    def in_gamma(self) -> np.ndarray:
        return self.mask.any(axis=2)

    @property
    def mode_count(self) -> np.ndarray:
        return self.mask.sum(axis=2)

    def nonempty_modes(self) -> list[int]:
        return [j + 1 for j in range(self.mode_cap) if self.mask[:, :, j].any()]

    def rows(self):
        """``(D_v, D_w, modes)`` per cell, row-major in ``D_v``."""
        for i, dv in enumerate(self.dv_axis):
            for k, dw in enumerate(self.dw_axis):
                yield float(dv), float(dw), sorted(self.modes(i, k))


def _check_axis(axis, name: str) -> np.ndarray:
    a = np.asarray(axis, dtype=float)
    if a.ndim != 1 or a.size < 2:
        raise ValidationError(f"{name} needs at least two samples")
    if np.any(np.diff(a) <= 0):
        raise ValidationError(f"{name} must be strictly increasing")
    if np.any(a <= 0):
        raise ValidationError(f"{name} must be positive")
    return a


def _rh_fields(J: np.ndarray, dv: np.ndarray, dw: np.ndarray, lam: np.ndarray):
    """``p1, p1 p2 - p3, p3`` of ``mu D - J`` broadcast over ``(dv, dw, lam)``."""
    a0 = -J[0, 0]
    a1 = -J[1, 1] + lam * dv
    a2 = -J[2, 2] + lam * dw
    # off-diagonal entries of mu D - J are -J_ik; pair products keep the sign of J_ik J_ki
    c01, c02, c12 = J[0, 1] * J[1, 0], J[0, 2] * J[2, 0], J[1, 2] * J[2, 1]
    cyc = J[0, 1] * J[1, 2] * J[2, 0] + J[0, 2] * J[1, 0] * J[2, 1]
    p1 = a0 + a1 + a2
    p2 = a0 * a1 - c01 + a0 * a2 - c02 + a1 * a2 - c12
    p3 = a0 * a1 * a2 - a0 * c12 - a1 * c02 - a2 * c01 - cyc
    return p1, p1 * p2 - p3, p3


def gamma_mask(blocks: JacobianBlocks, dv_axis, dw_axis, L: float = 1.0, j_max: int = 64,
               jobs: int = 1) -> RegionGrid:
    """Mark mode ``j`` unstable where ``p3(lam_j) < 0`` or ``p1 p2 - p3 < 0``."""
    _require_three(blocks)
    dv_axis = _check_axis(dv_axis, "dv_axis")
    dw_axis = _check_axis(dw_axis, "dw_axis")
    if j_max < 1:
        raise ValidationError("j_max must be at least 1")
    if not L > 0:
        raise ValidationError("L must be positive")
    if spectral_abscissa(blocks.J) >= 0:
        raise ValidationError("the constant state is unstable without diffusion; region undefined")
    J = blocks.J
    lam = ((np.arange(1, j_max + 1) * np.pi / L) ** 2)[None, None, :]
    dw = dw_axis[None, :, None]

    def chunk(rows: np.ndarray):
        _, hur, p3 = _rh_fields(J, rows[:, None, None], dw, lam)
        return np.minimum(p3, hur)

    parts = np.array_split(dv_axis, max(1, min(jobs, dv_axis.size)))
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            ind = np.concatenate(list(pool.map(chunk, parts)), axis=0)
    else:
        ind = np.concatenate([chunk(p) for p in parts], axis=0)
    log_scale = bool(np.allclose(np.diff(np.log(dv_axis)), np.log(dv_axis[1] / dv_axis[0]))
                     and np.allclose(np.diff(np.log(dw_axis)), np.log(dw_axis[1] / dw_axis[0])))
    return RegionGrid(dv_axis, dw_axis, ind < 0, ind, j_max, L, log_scale)


def region_boundary(grid: RegionGrid, j: int) -> list[np.ndarray]:
    """Zero contour of the mode-``j`` indicator as ``(k, 2)`` arrays of ``(D_v, D_w)``.

    Marching squares runs in log coordinates for log-spaced axes.
    """
    if not 1 <= j <= grid.mode_cap:
        raise ValidationError(f"mode {j} was not computed (cap {grid.mode_cap})")
    z = grid.indicator[:, :, j - 1]
    if not (z < 0).any():
        return []
    if grid.log_scale:
        x, y = np.log10(grid.dv_axis), np.log10(grid.dw_axis)
    else:
        x, y = grid.dv_axis, grid.dw_axis
    gen = contourpy.contour_generator(x=x, y=y, z=z.T, name="serial")
    lines = gen.lines(0.0)
    if grid.log_scale:
        lines = [10.0 ** ln for ln in lines]
    return [np.asarray(ln) for ln in lines if len(ln) > 1]


# ----------------------------------------------------------- parameter masks


@dataclass
class ParamMask:
    axis1_name: str
    axis1: np.ndarray
    axis2_name: str
    axis2: np.ndarray
    flags: np.ndarray  # (4, n1, n2): zeta > 0, theta > 0, item (3), condition (4)

    @property
    def intersection(self) -> np.ndarray:
        return self.flags.all(axis=0)

    def rows(self):
        for i, a in enumerate(self.axis1):
            for k, b in enumerate(self.axis2):
                f = self.flags[:, i, k]
                yield float(a), float(b), *[bool(x) for x in f], bool(f.all())


def feasibility_flags(m1, m2, m3, mu1, mu2, mu3) -> np.ndarray:
    """Four membership flags (stacked on axis 0) for array-valued parameters."""
    m1, m2, m3, mu1, mu2, mu3 = np.broadcast_arrays(*(np.asarray(a, dtype=float)
                                                      for a in (m1, m2, m3, mu1, mu2, mu3)))
    eta1, eta2, eta3 = m1 / mu1, m2 / mu2, m3 / mu3
    alpha = m2 * eta1 - eta3
    zeta = alpha - 2.0 * mu2
    theta = zeta ** 2 - 4.0 * mu2 * (mu2 + eta3)
    pos = theta > 0
    sq = np.sqrt(np.where(pos, theta, 0.0))
    rhs3 = 2.0 * (mu1 / mu3 - 1.0) * (mu2 + eta3) * eta1 * eta3 / (m1 + m2)
    r3 = pos & (alpha + 2.0 * eta3 + sq > rhs3)
    r4 = eta1 < 2.0 * (eta3 / m2 + 2.0 / eta2)
    return np.stack([zeta > 0, pos, r3, r4])


def _check_param_axis(name: str, values) -> np.ndarray:
    if name not in PARAM_NAMES:
        raise ValidationError(f"unknown parameter axis {name!r}")
    a = np.asarray(values, dtype=float)
    if a.ndim != 1 or a.size < 1:
        raise ValidationError(f"axis {name} needs a one-dimensional sample vector")
    if name.startswith("mu"):
        ok = np.all((a > 0) & (a <= 1.0))
    else:
        ok = np.all(a >= 2.0)
    if not ok:
        raise ValidationError(f"axis {name} leaves the admissible range "
                              f"({'(0, 1]' if name.startswith('mu') else '[2, inf)'})")
    return a


def param_masks(base: ReceptorParams, axis1: tuple[str, object], axis2: tuple[str, object]) -> ParamMask:
    n1, n2 = axis1[0], axis2[0]
    if n1 == n2:
        raise ValidationError("the two axes must name different parameters")
    a1 = _check_param_axis(n1, axis1[1])
    a2 = _check_param_axis(n2, axis2[1])
    vals = base.as_dict()
    grid1, grid2 = np.meshgrid(a1, a2, indexing="ij")
    vals[n1], vals[n2] = grid1, grid2
    flags = feasibility_flags(*(vals[k] for k in PARAM_NAMES))
    return ParamMask(n1, a1, n2, a2, flags)


def default_param_axis(name: str, n: int = 121) -> np.ndarray:
    if name.startswith("mu"):
        return np.linspace(0.2, 1.0, n)
    return np.linspace(2.0, 12.0, n)

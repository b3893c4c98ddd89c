"""One-dimensional IMEX time integration with Neumann boundaries.

Each step advances the immobile components by explicit Euler and every
diffusing component by backward-Euler diffusion with an explicit reaction
term, ``(I - dt D_i Lap_h) x_new = x_old + dt F_i``. ``Lap_h`` is the
second-difference matrix on the cell-centred grid with mirror (ghost-point)
closure, so its eigenvectors are exactly the sampled cosines.

The receptor model runs through a fused numba kernel; every other model
uses a generic NumPy path with identical arithmetic.
"""
from __future__ import annotations

import logging
import time as _time
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import BlowupError, InvariantRegionViolation, ValidationError
from .models import ModelSpec, reaction_rates
from .spectral import analysis, midpoint_grid

log = logging.getLogger(__name__)

FLUSH_BELOW = 1e-250
LOWER_TOL = -1e-12


@dataclass
class Field:
    """Grid samples ``data[i, k]`` of component ``i`` at ``x[k]``."""

    x: np.ndarray
    data: np.ndarray
    length: float = 1.0

    @property
    def u(self):
        return self.data[0]

    @property
    def v(self):
        return self.data[1]

    @property
    def w(self):
        return self.data[2]

    def copy(self) -> "Field":
        return Field(self.x.copy(), self.data.copy(), self.length)


@dataclass
class SimConfig:
    model: ModelSpec
    M: int = 512
    dt: float = 1e-3
    T: float = 2000.0
    window: float = 50.0
    theta_ss: float = 1e-9
    stop_when_steady: bool = True
    check_invariant: bool = True
    snapshot_every: int = 1  # in windows
    seed: int = 0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValidationError("dt must be positive")
        if self.M < 16:
            raise ValidationError("M must be at least 16")
        if not self.T > 0 or not self.window > 0:
            raise ValidationError("T and window must be positive")
        if self.snapshot_every < 1:
            raise ValidationError("snapshot_every must be a positive integer")

    @property
    def steps_per_window(self) -> int:
        return max(1, int(round(self.window / self.dt)))

    @property
    def dx(self) -> float:
        return self.model.domain_length / self.M

    @property
    def cfl(self) -> float:
        """``dt max(D) / dx^2``; affects accuracy only."""
        return self.dt * float(np.max(self.model.diffusion)) / self.dx ** 2


@dataclass
class Trajectory:
    times: list[float]
    snapshots: list[Field]
    final: Field
    steady: bool
    drift: float
    drift_history: list[tuple[float, float]] = field(default_factory=list)
    t_end: float = 0.0
    wall_time: float = 0.0
    invariant_bound: np.ndarray | None = None

    def dominant_modes(self) -> list[int]:
        return [int(np.argmax(np.abs(c[1:]))) + 1 for c in mode_amplitudes(self.final)]


# ------------------------------------------------------------ tridiagonal


@numba.njit(cache=True)
def _factor(r, M):
    """Forward-sweep factors of ``tridiag(-r, 1 + 2r, -r)`` with mirror ends.

    Returns ``cp`` (super-diagonal multipliers) and ``inv`` (reciprocal pivots).
    """
    cp = np.empty(M)
    inv = np.empty(M)
    b0 = 1.0 + r
    inv[0] = 1.0 / b0
    cp[0] = -r * inv[0]
    for i in range(1, M):
        b = 1.0 + 2.0 * r if i < M - 1 else 1.0 + r
        piv = b + r * cp[i - 1]
        inv[i] = 1.0 / piv
        cp[i] = -r * inv[i]
    return cp, inv


@numba.njit(cache=True)
def _solve(r, cp, inv, rhs, out):
    M = rhs.size
    out[0] = rhs[0] * inv[0]
    for i in range(1, M):
        out[i] = (rhs[i] + r * out[i - 1]) * inv[i]
    for i in range(M - 2, -1, -1):
        out[i] -= cp[i] * out[i + 1]


@numba.njit(cache=True, fastmath=False)
def _receptor_steps(u, v, w, nsteps, dt, p, rv, cpv, iv, rw, cpw, iw, yv, yw):
    """Advance the receptor system ``nsteps`` steps in place.

    The reaction evaluation is fused with the forward elimination of both
    tridiagonal solves; the two recurrences are independent and interleave.
    """
    m1, m2, m3, mu1, mu2, mu3 = p[0], p[1], p[2], p[3], p[4], p[5]
    M = u.size
    for _ in range(nsteps):
        prev_v = 0.0
        prev_w = 0.0
        for i in range(M):
            ui = u[i]
            vi = v[i]
            wi = w[i]
            uv = ui * vi
            s = uv / (1.0 + uv)
            bv = vi + dt * (-mu2 * vi + m2 * s - vi * wi)
            bw = wi + dt * (-mu3 * wi + m3 * s)
            un = ui + dt * (-mu1 * ui + m1 * s)
            if abs(un) < 1e-250:
                un = 0.0
            u[i] = un
            prev_v = (bv + rv * prev_v) * iv[i]
            prev_w = (bw + rw * prev_w) * iw[i]
            yv[i] = prev_v
            yw[i] = prev_w
        nv = yv[M - 1]
        nw = yw[M - 1]
        v[M - 1] = nv
        w[M - 1] = nw
        for i in range(M - 2, -1, -1):
            nv = yv[i] - cpv[i] * nv
            nw = yw[i] - cpw[i] * nw
            v[i] = nv
            w[i] = nw


class _Stepper:
    """Precomputed factorizations for a fixed model, grid and time step."""

    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        model = cfg.model
        self.Dvec = model.diffusion
        self.r = cfg.dt * self.Dvec / cfg.dx ** 2
        self.factors = {}
        for i, d in enumerate(self.Dvec):
            if d > 0:
                self.factors[i] = _factor(float(self.r[i]), cfg.M)
        self.fast = model.name == "receptor"
        if self.fast:
            pr = model.params
            self.p = np.array([pr["m1"], pr["m2"], pr["m3"], pr["mu1"], pr["mu2"], pr["mu3"]])
            self.yv = np.empty(cfg.M)
            self.yw = np.empty(cfg.M)

    def step_numpy(self, data: np.ndarray) -> np.ndarray:
        cfg = self.cfg
        F = reaction_rates(cfg.model, data)
        out = np.empty_like(data)
        for i, d in enumerate(self.Dvec):
            rhs = data[i] + cfg.dt * F[i]
            if d > 0:
                cp, inv = self.factors[i]
                _solve(float(self.r[i]), cp, inv, np.ascontiguousarray(rhs), out[i])
            else:
                rhs[np.abs(rhs) < FLUSH_BELOW] = 0.0
                out[i] = rhs
        return out

    def advance(self, data: np.ndarray, nsteps: int) -> None:
        """In-place advance of ``data`` (shape ``(m, M)``)."""
        if self.fast:
            cpv, iv = self.factors[1]
            cpw, iw = self.factors[2]
            _receptor_steps(data[0], data[1], data[2], nsteps, self.cfg.dt, self.p,
                            float(self.r[1]), cpv, iv, float(self.r[2]), cpw, iw, self.yv, self.yw)
        else:
            for _ in range(nsteps):
                data[:] = self.step_numpy(data)


def step_imex(state: Field, cfg: SimConfig, t: float = 0.0) -> Field:
    """One IMEX step. Raises BlowupError if the result is not finite."""
    if not np.all(np.isfinite(state.data)):
        raise BlowupError("state is not finite", t)
    out = _Stepper(cfg).step_numpy(state.data)
    if not np.all(np.isfinite(out)):
        raise BlowupError(f"non-finite values after step at t = {t + cfg.dt:g}", t + cfg.dt)
    return Field(state.x, out, state.length)


# ------------------------------------------------------- invariant region


def invariant_bounds(params, initial: np.ndarray, factor: float = 1.05) -> np.ndarray:
    """``A_i = factor * max(eta_i, max of initial component i)``."""
    eta = np.array([params["m1"] / params["mu1"], params["m2"] / params["mu2"],
                    params["m3"] / params["mu3"]])
    return factor * np.maximum(eta, np.max(initial, axis=1))


def _violation(data: np.ndarray, A: np.ndarray):
    low = data < LOWER_TOL
    high = data > A[:, None]
    bad = low | high
    if not bad.any():
        return None
    comp, loc = np.argwhere(bad)[0]
    return int(comp), int(loc)


def invariant_region_check(state: Field, params, A) -> bool:
    """True iff ``0 <= state <= A`` componentwise (lower tolerance ``1e-12``)."""
    A = np.asarray(A, dtype=float)
    if state.data.shape[0] != 3 or A.shape != (3,):
        raise ValidationError("invariant rectangle is defined for three components")
    eta = np.array([params["m1"] / params["mu1"], params["m2"] / params["mu2"],
                    params["m3"] / params["mu3"]])
    if np.any(A < eta):
        raise ValidationError("invariant rectangle needs A_i >= eta_i")
    return _violation(state.data, A) is None


def mode_amplitudes(state: Field, N: int | None = None) -> np.ndarray:
    """Cosine coefficients per component (shape ``(m, N)``)."""
    return analysis(state.data, N)


# -------------------------------------------------------------------- run


def run(cfg: SimConfig, initial: Field, progress=None) -> Trajectory:
    """Integrate to ``cfg.T`` or until the windowed drift drops below ``theta_ss``.

    Drift is ``|X(t) - X(t - W)|_inf / W`` evaluated at the end of each
    window of length ``W``.
    """
    model = cfg.model
    if initial.data.shape != (model.m, cfg.M):
        raise ValidationError(f"initial field has shape {initial.data.shape}, "
                              f"expected {(model.m, cfg.M)}")
    if not np.all(np.isfinite(initial.data)):
        raise ValidationError("initial field is not finite")
    stepper = _Stepper(cfg)
    data = np.ascontiguousarray(initial.data, dtype=float).copy()
    x = initial.x
    check = cfg.check_invariant and model.name == "receptor"
    A = invariant_bounds(model.params, data) if check else None
    if check and (bad := _violation(data, A)) is not None:
        raise InvariantRegionViolation("initial data outside the invariant rectangle",
                                       bad[0], float(x[bad[1]]), 0.0)
    n_win = stepper.cfg.steps_per_window
    W = n_win * cfg.dt
    n_total = int(np.ceil(cfg.T / W - 1e-9))
    times = [0.0]
    snaps = [Field(x, data.copy(), model.domain_length)]
    hist = []
    drift = np.inf
    steady = False
    t = 0.0
    tic = _time.perf_counter()
    for k in range(1, n_total + 1):
        prev = data.copy()
        stepper.advance(data, n_win)
        t = k * W
        if not np.all(np.isfinite(data)):
            raise BlowupError(f"non-finite state within window ending at t = {t:g}", t)
        if check and (bad := _violation(data, A)) is not None:
            raise InvariantRegionViolation(
                f"component {bad[0]} left [0, {A[bad[0]]:.4g}] at x = {x[bad[1]]:.4g}, t = {t:g}",
                bad[0], float(x[bad[1]]), t)
        drift = float(np.max(np.abs(data - prev))) / W
        hist.append((t, drift))
        if k % cfg.snapshot_every == 0:
            times.append(t)
            snaps.append(Field(x, data.copy(), model.domain_length))
        if progress is not None:
            progress(t, drift)
        if drift < cfg.theta_ss:
            steady = True
            if cfg.stop_when_steady:
                break
        else:
            steady = False
    final = Field(x, data.copy(), model.domain_length)
    if times[-1] != t:
        times.append(t)
        snaps.append(final)
    wall = _time.perf_counter() - tic
    log.info("simulated to t = %g in %.1f s, drift %.3e", t, wall, drift)
    return Trajectory(times, snaps, final, steady, drift, hist, t, wall, A)


# ------------------------------------------------------ initial conditions


def constant_field(state, M: int, L: float = 1.0) -> Field:
    state = np.asarray(state, dtype=float)
    return Field(midpoint_grid(M, L), np.repeat(state[:, None], M, axis=1), L)


def perturbation(kind: str, x: np.ndarray, L: float, rng: np.random.Generator, base: float = 1.0,
                 amp: float = 0.01, mode: int = 1, freq: float = 10.0, ramp: float = 0.1) -> np.ndarray:
    """Perturbation profile for one component.

    kinds
    -----
    ``uniform``   ``amp * U(-1, 1)`` i.i.d. per grid point.
    ``cosine``    ``amp * base * cos(mode pi x / L)``.
    ``ramp_sine`` ``ramp * (x / L) * sin(freq pi x / L)``.
    ``none``      zeros.
    """
    if kind == "uniform":
        return amp * rng.uniform(-1.0, 1.0, x.size)
    if kind == "cosine":
        return amp * base * np.cos(mode * np.pi * x / L)
    if kind == "ramp_sine":
        return ramp * (x / L) * np.sin(freq * np.pi * x / L)
    if kind == "none":
        return np.zeros_like(x)
    raise ValidationError(f"unknown perturbation kind {kind!r}")


def perturbed_field(base, M: int, L: float, specs, seed: int = 0) -> Field:
    """Constant ``base`` plus one perturbation spec per component.

    Random draws are taken component by component in order from a single
    generator seeded with ``seed``.
    """
    fld = constant_field(base, M, L)
    rng = np.random.default_rng(seed)
    for i, spec in enumerate(specs):
        spec = dict(spec or {"kind": "none"})
        kind = spec.pop("kind")
        fld.data[i] += perturbation(kind, fld.x, L, rng, base=float(fld.data[i, 0]), **spec)
    return fld


def resample(x_src: np.ndarray, data: np.ndarray, M: int, L: float) -> Field:
    """Linear interpolation of grid data onto the ``M``-point midpoint grid."""
    x = midpoint_grid(M, L)
    if x_src.size == M and np.allclose(x_src, x, rtol=0, atol=1e-12 * L):
        return Field(x, np.array(data, dtype=float), L)
    out = np.vstack([np.interp(x, x_src, row) for row in data])
    return Field(x, out, L)


def forced_jump(state: Field, intervals, component: int = 0) -> Field:
    """Set one component to zero on the given open intervals; others untouched."""
    out = state.copy()
    for a, b in intervals:
        out.data[component, (state.x > a) & (state.x < b)] = 0.0
    return out

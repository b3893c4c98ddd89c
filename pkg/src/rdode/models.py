"""Model definitions, reaction evaluation, Jacobians and Neumann eigendata.

Two kinetic families are registered: the receptor-ligand-enzyme model
(one immobile and two diffusing species) and a ``linear`` model whose
reaction map is ``F(X) = J X`` for an explicit matrix ``J``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import NumericalFailure, ValidationError

RECEPTOR_PARAMS = ("m1", "m2", "m3", "mu1", "mu2", "mu3")


@dataclass(frozen=True)
class ModelSpec:
    """A reaction-diffusion-ODE system on the interval ``(0, L)``.

    Components are ordered ``(u, v, w)``: ``m_n`` nondiffusive, ``m_s``
    slow-diffusive and ``m_f`` fast-diffusive species.
    """

    name: str
    m_n: int
    m_s: int
    m_f: int
    params: Mapping[str, object] = field(default_factory=dict)
    domain_length: float = 1.0
    D_v: tuple[float, ...] = ()
    D_w: tuple[float, ...] = ()

    def __post_init__(self):
        for label, count in (("m_n", self.m_n), ("m_s", self.m_s), ("m_f", self.m_f)):
            if int(count) != count or count < 0:
                raise ValidationError(f"{label} must be a nonnegative integer, got {count!r}")
        if self.m < 1:
            raise ValidationError("model needs at least one component")
        if not self.domain_length > 0:
            raise ValidationError(f"domain length must be positive, got {self.domain_length}")
        object.__setattr__(self, "D_v", tuple(float(d) for d in self.D_v))
        object.__setattr__(self, "D_w", tuple(float(d) for d in self.D_w))
        if len(self.D_v) != self.m_s or len(self.D_w) != self.m_f:
            raise ValidationError(
                f"diffusion vectors have lengths ({len(self.D_v)}, {len(self.D_w)}), "
                f"expected ({self.m_s}, {self.m_f})"
            )
        if any(not d > 0 for d in self.D_v + self.D_w):
            raise ValidationError("all diffusion coefficients must be strictly positive")
        if self.name not in REGISTRY:
            raise ValidationError(f"unknown model {self.name!r}; known: {sorted(REGISTRY)}")
        REGISTRY[self.name].validate(self)

    @property
    def m(self) -> int:
        return self.m_n + self.m_s + self.m_f

    @property
    def diffusion(self) -> np.ndarray:
        """Diagonal of ``D`` with exact zeros on the nondiffusive slots."""
        return np.array((0.0,) * self.m_n + self.D_v + self.D_w)

    def with_diffusion(self, D_v, D_w) -> "ModelSpec":
        return ModelSpec(self.name, self.m_n, self.m_s, self.m_f, self.params,
                         self.domain_length, tuple(np.atleast_1d(D_v)), tuple(np.atleast_1d(D_w)))

    def with_length(self, L: float) -> "ModelSpec":
        return ModelSpec(self.name, self.m_n, self.m_s, self.m_f, self.params,
                         L, self.D_v, self.D_w)


@dataclass(frozen=True)
class ReactionEval:
    rates: np.ndarray


@dataclass(frozen=True)
class JacobianBlocks:
    """Full Jacobian and its principal submatrices in ``(u, v, w)`` order."""

    J: np.ndarray
    m_n: int
    m_s: int
    m_f: int

    def _idx(self, *groups: str) -> np.ndarray:
        bounds = {"1": (0, self.m_n),
                  "2": (self.m_n, self.m_n + self.m_s),
                  "3": (self.m_n + self.m_s, self.m_n + self.m_s + self.m_f)}
        return np.concatenate([np.arange(*bounds[g]) for g in groups]).astype(int)

    def sub(self, key: str) -> np.ndarray:
        """Principal submatrix by key ``"1"``, ``"12"``, ``"23"`` and so on."""
        idx = self._idx(*key)
        return self.J[np.ix_(idx, idx)]

    @property
    def J1(self):
        return self.sub("1")

    @property
    def J2(self):
        return self.sub("2")

    @property
    def J3(self):
        return self.sub("3")

    @property
    def J12(self):
        return self.sub("12")

    @property
    def J13(self):
        return self.sub("13")

    @property
    def J23(self):
        return self.sub("23")

    @property
    def m(self) -> int:
        return self.m_n + self.m_s + self.m_f

    def reassemble(self) -> np.ndarray:
        """Rebuild ``J`` from ``J12``, ``J13`` and ``J23`` slices only."""
        out = np.full_like(self.J, np.nan)
        for key in ("12", "13", "23"):
            idx = self._idx(*key)
            out[np.ix_(idx, idx)] = self.sub(key)
        return out


@dataclass(frozen=True)
class NeumannMode:
    """Eigenpair ``(lambda_j, cos(j pi x / L))`` of ``-d^2/dx^2`` with no-flux ends."""

    index: int
    length: float
    eigenvalue: float

    def __call__(self, x):
        return np.cos(self.index * math.pi * np.asarray(x) / self.length)


def neumann_eigenvalue(j: int, L: float) -> NeumannMode:
    if L <= 0:
        raise ValidationError(f"domain length must be positive, got {L}")
    if j < 0:
        raise ValidationError(f"mode index must be nonnegative, got {j}")
    return NeumannMode(int(j), float(L), (j * math.pi / L) ** 2)


def neumann_eigenvalues(j_max: int, L: float) -> np.ndarray:
    """``lambda_j`` for ``j = 0..j_max`` as an array."""
    j = np.arange(j_max + 1)
    return (j * np.pi / L) ** 2


# ---------------------------------------------------------------- kinetics


@dataclass(frozen=True)
class Kinetics:
    partition: tuple[int, int, int] | None
    rhs: Callable[[Mapping, np.ndarray], np.ndarray]
    jac: Callable[[Mapping, np.ndarray], np.ndarray] | None
    validate: Callable[["ModelSpec"], None]
    box: Callable[[Mapping], np.ndarray | None]


def _receptor_rhs(p, X):
    u, v, w = X[0], X[1], X[2]
    uv = u * v
    s = uv / (1.0 + uv)
    return np.stack([
        -p["mu1"] * u + p["m1"] * s,
        -p["mu2"] * v + p["m2"] * s - v * w,
        -p["mu3"] * w + p["m3"] * s,
    ])


def _receptor_jac(p, X):
    u, v, w = (float(c) for c in X)
    q = 1.0 / (1.0 + u * v) ** 2  # d/du [uv/(1+uv)] = v q
    m1, m2, m3 = p["m1"], p["m2"], p["m3"]
    return np.array([
        [-p["mu1"] + m1 * v * q, m1 * u * q, 0.0],
        [m2 * v * q, -p["mu2"] + m2 * u * q - w, -v],
        [m3 * v * q, m3 * u * q, -p["mu3"]],
    ])


def _receptor_validate(model):
    if (model.m_n, model.m_s, model.m_f) != (1, 1, 1):
        raise ValidationError("receptor model has partition (1, 1, 1)")
    missing = [k for k in RECEPTOR_PARAMS if k not in model.params]
    if missing:
        raise ValidationError(f"receptor model missing parameters {missing}")
    for k in RECEPTOR_PARAMS:
        if not math.isfinite(float(model.params[k])):
            raise ValidationError(f"parameter {k} must be finite")


def _receptor_box(p):
    eta = [p["m1"] / p["mu1"], p["m2"] / p["mu2"], p["m3"] / p["mu3"]]
    return np.full(3, 10.0 * max(eta))


def _linear_matrix(p) -> np.ndarray:
    return np.asarray(p["J"], dtype=float)


def _linear_validate(model):
    if "J" not in model.params:
        raise ValidationError("linear model needs parameter 'J'")
    J = _linear_matrix(model.params)
    if J.shape != (model.m, model.m):
        raise ValidationError(f"linear model matrix has shape {J.shape}, expected {(model.m, model.m)}")
    if not np.all(np.isfinite(J)):
        raise ValidationError("linear model matrix has non-finite entries")


REGISTRY: dict[str, Kinetics] = {
    "receptor": Kinetics(
        partition=(1, 1, 1),
        rhs=_receptor_rhs,
        jac=_receptor_jac,
        validate=_receptor_validate,
        box=_receptor_box,
    ),
    "linear": Kinetics(
        partition=None,
        rhs=lambda p, X: np.tensordot(_linear_matrix(p), X, axes=1),
        jac=lambda p, X: _linear_matrix(p).copy(),
        validate=_linear_validate,
        box=lambda p: None,
    ),
}


def receptor_model(params: Mapping[str, float], D_v: float = 1.0, D_w: float = 1.0,
                   L: float = 1.0) -> ModelSpec:
    return ModelSpec("receptor", 1, 1, 1, {k: float(params[k]) for k in RECEPTOR_PARAMS},
                     L, (D_v,), (D_w,))


def linear_model(J, partition: Sequence[int] = (1, 1, 1), D_v=None, D_w=None,
                 L: float = 1.0) -> ModelSpec:
    J = np.asarray(J, dtype=float)
    m_n, m_s, m_f = partition
    D_v = (1.0,) * m_s if D_v is None else tuple(np.atleast_1d(D_v))
    D_w = (1.0,) * m_f if D_w is None else tuple(np.atleast_1d(D_w))
    return ModelSpec("linear", m_n, m_s, m_f, {"J": tuple(map(tuple, J))}, L, D_v, D_w)


def admissible_box(model: ModelSpec) -> np.ndarray | None:
    """Upper corner ``B`` of the box ``[0, B]^m``, or None if unbounded."""
    return REGISTRY[model.name].box(model.params)


def _check_state(model: ModelSpec, state) -> np.ndarray:
    state = np.asarray(state, dtype=float)
    if state.shape[:1] != (model.m,):
        raise ValidationError(f"state has leading dimension {state.shape[:1]}, expected ({model.m},)")
    return state


def reaction_rates(model: ModelSpec, state) -> np.ndarray:
    """Vectorised ``F``; ``state`` has shape ``(m, ...)``. No box checks."""
    state = _check_state(model, state)
    return REGISTRY[model.name].rhs(model.params, state)


def evaluate_reaction(model: ModelSpec, state) -> ReactionEval:
    if model.name not in REGISTRY:
        raise ValidationError(f"unknown model {model.name!r}")
    state = _check_state(model, state)
    if state.ndim != 1:
        raise ValidationError("evaluate_reaction takes a single state vector")
    box = admissible_box(model)
    if box is not None and (np.any(state < 0) or np.any(state > box)):
        raise ValidationError(f"state {state} outside admissible box [0, {box[0]:g}]^{model.m}")
    rates = REGISTRY[model.name].rhs(model.params, state)
    if not np.all(np.isfinite(rates)):
        raise NumericalFailure(f"reaction evaluation produced non-finite values at {state}")
    return ReactionEval(np.asarray(rates, dtype=float))


def fd_jacobian(model: ModelSpec, point, h: float | None = None) -> np.ndarray:
    """Central finite-difference Jacobian.

    The default step is ``1e-6 * max(1, |point|_inf)``.
    """
    point = np.asarray(point, dtype=float)
    if h is None:
        h = 1e-6 * max(1.0, float(np.max(np.abs(point))))
    rhs = REGISTRY[model.name].rhs
    J = np.empty((model.m, model.m))
    for i in range(model.m):
        e = np.zeros(model.m)
        e[i] = h
        J[:, i] = (rhs(model.params, point + e) - rhs(model.params, point - e)) / (2 * h)
    return J


def jacobian(model: ModelSpec, point, analytic: bool = True) -> JacobianBlocks:
    point = _check_state(model, point)
    box = admissible_box(model)
    if box is not None and (np.any(point < 0) or np.any(point > box)):
        raise ValidationError(f"point {point} outside admissible box")
    kin = REGISTRY[model.name]
    if analytic and kin.jac is not None:
        J = np.asarray(kin.jac(model.params, point), dtype=float)
    else:
        J = fd_jacobian(model, point)
    if not np.all(np.isfinite(J)):
        raise NumericalFailure(f"Jacobian has non-finite entries at {point}")
    return JacobianBlocks(J, model.m_n, model.m_s, model.m_f)


def blocks_from_matrix(J, partition: Sequence[int] = (1, 1, 1)) -> JacobianBlocks:
    J = np.asarray(J, dtype=float)
    m_n, m_s, m_f = partition
    if J.shape != (m_n + m_s + m_f,) * 2:
        raise ValidationError(f"matrix shape {J.shape} does not match partition {tuple(partition)}")
    return JacobianBlocks(J, m_n, m_s, m_f)

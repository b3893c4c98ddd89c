"""Closed-form analysis of the receptor-ligand-enzyme model.

Kinetics, with ``s = uv / (1 + uv)``::

    f = -mu1 u + m1 s
    g = -mu2 v + m2 s - v w
    h = -mu3 w + m3 s
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .errors import BranchDomainError, ValidationError
from .models import ModelSpec, jacobian, reaction_rates, receptor_model
from .polynomial import spectral_abscissa

VERDICT_MARGIN = 1e-8


@dataclass(frozen=True)
class ReceptorParams:
    m1: float
    m2: float
    m3: float
    mu1: float
    mu2: float
    mu3: float

    def __post_init__(self):
        for f in fields(self):
            object.__setattr__(self, f.name, float(getattr(self, f.name)))
        bad = [k for k in ("m1", "m2", "m3") if not getattr(self, k) >= 2.0]
        bad += [k for k in ("mu1", "mu2", "mu3") if not 0.0 < getattr(self, k) <= 1.0]
        if bad:
            raise ValidationError(
                f"parameters {bad} lie outside the admissible set m_i >= 2, mu_i in (0, 1]")

    @classmethod
    def from_mapping(cls, mapping) -> "ReceptorParams":
        try:
            return cls(**{f.name: mapping[f.name] for f in fields(cls)})
        except KeyError as exc:
            raise ValidationError(f"missing receptor parameter {exc.args[0]!r}") from None

    def as_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def replace(self, **kw) -> "ReceptorParams":
        return ReceptorParams(**{**self.as_dict(), **kw})

    def model(self, D_v: float = 1.0, D_w: float = 1.0, L: float = 1.0) -> ModelSpec:
        return receptor_model(self.as_dict(), D_v, D_w, L)


PSTAR = ReceptorParams(2.5, 9.68, 7.0, 0.95, 0.95, 0.6)
FIGURE_PARAMS = ReceptorParams(2.5, 9.68, 7.0, 1.0, 1.0, 0.6)


@dataclass(frozen=True)
class DerivedQuantities:
    eta1: float
    eta2: float
    eta3: float
    alpha: float
    zeta: float
    theta: float


def derive_quantities(p: ReceptorParams) -> DerivedQuantities:
    eta1, eta2, eta3 = p.m1 / p.mu1, p.m2 / p.mu2, p.m3 / p.mu3
    alpha = p.m2 * eta1 - eta3
    zeta = alpha - 2.0 * p.mu2
    theta = zeta ** 2 - 4.0 * p.mu2 * (p.mu2 + eta3)
    return DerivedQuantities(eta1, eta2, eta3, alpha, zeta, theta)


@dataclass(frozen=True)
class SteadyStateTriple:
    X0: np.ndarray
    Xminus: np.ndarray | None
    Xplus: np.ndarray | None
    exists: bool
    minus_positive: bool
    plus_positive: bool

    def residuals(self, p: ReceptorParams) -> dict[str, float]:
        model = p.model()
        out = {}
        for name, X in (("X0", self.X0), ("Xminus", self.Xminus), ("Xplus", self.Xplus)):
            if X is not None:
                out[name] = float(np.max(np.abs(reaction_rates(model, X))))
        return out


def _state_from_v(d: DerivedQuantities, v: float) -> np.ndarray:
    u = d.eta1 - 1.0 / v
    w = d.eta3 - d.eta3 / (d.eta1 * v)
    return np.array([u, v, w])


def steady_states(p: ReceptorParams) -> SteadyStateTriple:
    """The trivial state and, when ``theta > 0``, the two nontrivial ones."""
    d = derive_quantities(p)
    X0 = np.zeros(3)
    if not d.theta > 0:
        return SteadyStateTriple(X0, None, None, False, False, False)
    sq = math.sqrt(d.theta)
    den = 2.0 * d.eta1 * (p.mu2 + d.eta3)
    v_plus = (d.alpha + 2.0 * d.eta3 + sq) / den
    # product of roots avoids cancellation for the smaller one
    v_minus = p.m2 / (d.eta1 * (p.mu2 + d.eta3)) / v_plus
    Xp, Xm = _state_from_v(d, v_plus), _state_from_v(d, v_minus)
    return SteadyStateTriple(X0, Xm, Xp, True, bool(np.all(Xm > 0)), bool(np.all(Xp > 0)))


def vieta(p: ReceptorParams) -> tuple[float, float]:
    """Sum and product of the roots of ``eta1 (mu2 + eta3) v^2 - (alpha + 2 eta3) v + m2``."""
    d = derive_quantities(p)
    a = d.eta1 * (p.mu2 + d.eta3)
    return (d.alpha + 2.0 * d.eta3) / a, p.m2 / a


@dataclass(frozen=True)
class AssumptionReport:
    zeta_positive: bool
    theta_positive: bool
    item3: bool
    condition4: bool
    margins: tuple[float, float, float, float]

    @property
    def flags(self) -> tuple[bool, bool, bool, bool]:
        return (self.zeta_positive, self.theta_positive, self.item3, self.condition4)

    @property
    def all(self) -> bool:
        return all(self.flags)


def item3_margin(p: ReceptorParams, d: DerivedQuantities | None = None) -> float:
    """``alpha + 2 eta3 + sqrt(theta) - 2 (mu1/mu3 - 1)(mu2 + eta3) eta1 eta3 / (m1 + m2)``.

    NaN when ``theta <= 0``.
    """
    d = d or derive_quantities(p)
    if not d.theta > 0:
        return math.nan
    rhs = 2.0 * (p.mu1 / p.mu3 - 1.0) * (p.mu2 + d.eta3) * d.eta1 * d.eta3 / (p.m1 + p.m2)
    return d.alpha + 2.0 * d.eta3 + math.sqrt(d.theta) - rhs


def condition4_margin(p: ReceptorParams, d: DerivedQuantities | None = None) -> float:
    """``2 (eta3/m2 + 2/eta2) - eta1``; positive when the J12 mechanism is active."""
    d = d or derive_quantities(p)
    return 2.0 * (d.eta3 / p.m2 + 2.0 / d.eta2) - d.eta1


def check_assumptions(p: ReceptorParams) -> AssumptionReport:
    d = derive_quantities(p)
    m1 = d.zeta
    m2 = d.theta
    m3 = item3_margin(p, d)
    m4 = condition4_margin(p, d)
    return AssumptionReport(m1 > 0, m2 > 0, bool(m3 > 0), m4 > 0, (m1, m2, m3, m4))


def stability_verdicts(p: ReceptorParams, require_assumptions: bool = True) -> dict[str, str]:
    """Stable/unstable verdict per steady state from numerical spectra."""
    if require_assumptions:
        rep = check_assumptions(p)
        failed = [name for name, ok in zip(("(1) zeta > 0", "(2) theta > 0", "(3)"), rep.flags[:3]) if not ok]
        if failed:
            raise ValidationError(f"assumption items violated: {', '.join(failed)}")
    ss = steady_states(p)
    model = p.model()
    out = {}
    for name, X in (("X0", ss.X0), ("Xminus", ss.Xminus), ("Xplus", ss.Xplus)):
        if X is None:
            continue
        s = spectral_abscissa(jacobian(model, X).J)
        if abs(s) <= VERDICT_MARGIN:
            out[name] = "marginal"
        else:
            out[name] = "stable" if s < 0 else "unstable"
    return out


def j12_condition(p: ReceptorParams) -> bool:
    """Condition under which ``det J12`` at the upper steady state is negative.

    When it holds and the steady state exists, the sign of ``det J12`` is
    checked as well and an AssertionError raised on disagreement.
    """
    ok = condition4_margin(p) > 0
    if ok and check_assumptions(p).all:
        ss = steady_states(p)
        J12 = jacobian(p.model(), ss.Xplus).J12
        if not np.linalg.det(J12) < 0:
            raise AssertionError("condition holds but det J12 at the upper state is not negative")
    return ok


@dataclass(frozen=True)
class BranchPair:
    """Nullcline branches of ``f``: ``phi = eta1 - 1/v`` and ``psi = 0``."""

    eta1: float

    @property
    def crossing(self) -> float:
        """``v`` at which both branches meet."""
        return 1.0 / self.eta1

    def phi(self, v, w=None):
        v = np.asarray(v, dtype=float)
        if np.any(v <= 0):
            raise BranchDomainError("nontrivial branch needs v > 0")
        return self.eta1 - 1.0 / v

    def psi(self, v, w=None):
        return np.zeros_like(np.asarray(v, dtype=float))

    def phi_grad(self, v, w=None):
        """``(d phi/dv, d phi/dw)``."""
        v = np.asarray(v, dtype=float)
        return 1.0 / v ** 2, np.zeros_like(v)

    def in_domain(self, v) -> np.ndarray:
        """Where ``phi`` is positive, i.e. ``v > 1/eta1``."""
        return np.asarray(v) > self.crossing


def branch_pair(p: ReceptorParams) -> BranchPair:
    return BranchPair(p.m1 / p.mu1)

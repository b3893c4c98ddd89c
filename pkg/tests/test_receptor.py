import math

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from rdode.errors import BranchDomainError, ValidationError
from rdode.models import reaction_rates
from rdode.receptor import (FIGURE_PARAMS, PSTAR, ReceptorParams, branch_pair, check_assumptions,
                            condition4_margin, derive_quantities, item3_margin, j12_condition,
                            stability_verdicts, steady_states, vieta)

params_strategy = st.builds(
    ReceptorParams,
    st.floats(2, 12), st.floats(2, 12), st.floats(2, 12),
    st.floats(0.2, 1), st.floats(0.2, 1), st.floats(0.2, 1),
)


def test_params_validation_and_helpers():
    with pytest.raises(ValidationError):
        ReceptorParams(1.5, 3, 3, 0.5, 0.5, 0.5)
    with pytest.raises(ValidationError):
        ReceptorParams(3, 3, 3, 0.0, 0.5, 0.5)
    with pytest.raises(ValidationError):
        ReceptorParams(3, 3, 3, 1.2, 0.5, 0.5)
    p = ReceptorParams.from_mapping(PSTAR.as_dict())
    assert p == PSTAR
    assert p.replace(m1=3.0).m1 == 3.0
    assert p.model(0.1, 0.2, 3.0).domain_length == 3.0


def test_derived_quantities_pstar():
    d = derive_quantities(PSTAR)
    assert d.eta1 == pytest.approx(2.5 / 0.95)
    assert d.alpha == pytest.approx(9.68 * 2.5 / 0.95 - 7.0 / 0.6)
    assert d.zeta == pytest.approx(d.alpha - 1.9)
    assert d.theta == pytest.approx(d.zeta ** 2 - 4 * 0.95 * (0.95 + 7.0 / 0.6))


@pytest.mark.parametrize("params", [PSTAR, FIGURE_PARAMS])
def test_steady_states_against_symbolic_solution(params):
    u, v, w = sympy.symbols("u v w", positive=True)
    p = {k: sympy.nsimplify(x) for k, x in params.as_dict().items()}
    s = u * v / (1 + u * v)
    eqs = [-p["mu1"] * u + p["m1"] * s, -p["mu2"] * v + p["m2"] * s - v * w, -p["mu3"] * w + p["m3"] * s]
    sols = sympy.solve(eqs, [u, v, w], dict=True)
    ref = sorted((float(x[v]), float(x[u]), float(x[w])) for x in sols)
    ss = steady_states(params)
    ours = sorted((X[1], X[0], X[2]) for X in (ss.Xminus, ss.Xplus))
    assert np.array(ours) == pytest.approx(np.array(ref), rel=1e-12)
    assert ss.exists and ss.minus_positive and ss.plus_positive
    assert all(r < 1e-10 for r in ss.residuals(params).values())


def test_no_nontrivial_states_when_theta_nonpositive():
    p = ReceptorParams(2.0, 3.0, 4.0, 1.0, 1.0, 1.0)
    assert derive_quantities(p).theta <= 0
    ss = steady_states(p)
    assert not ss.exists and ss.Xplus is None and ss.Xminus is None
    assert math.isnan(item3_margin(p))


@settings(max_examples=300)
@given(params_strategy)
def test_vieta_and_residuals(p):
    ss = steady_states(p)
    if not ss.exists:
        return
    s, prod = vieta(p)
    assert ss.Xminus[1] + ss.Xplus[1] == pytest.approx(s, rel=1e-10)
    assert ss.Xminus[1] * ss.Xplus[1] == pytest.approx(prod, rel=1e-10)
    model = p.model()
    for X in (ss.Xminus, ss.Xplus):
        F = reaction_rates(model, X)
        assert np.max(np.abs(F)) < 1e-10 * max(1.0, np.max(np.abs(X)) ** 2)


def test_assumption_margins():
    rep = check_assumptions(PSTAR)
    assert rep.all and rep.flags == (True, True, True, True)
    zeta, theta, i3, c4 = rep.margins
    assert zeta == pytest.approx(11.9, abs=0.05)
    assert theta == pytest.approx(93.8, abs=0.05)
    assert i3 == pytest.approx(9.72, abs=0.01)
    assert c4 == pytest.approx(0.171, abs=0.001)
    d = derive_quantities(PSTAR)
    assert condition4_margin(PSTAR) == pytest.approx(2 * (d.eta3 / 9.68 + 2 / d.eta2) - d.eta1)


def test_stability_verdicts_require_assumptions():
    assert stability_verdicts(PSTAR) == {"X0": "stable", "Xminus": "unstable", "Xplus": "stable"}
    bad = ReceptorParams(2.0, 3.0, 4.0, 1.0, 1.0, 1.0)
    with pytest.raises(ValidationError):
        stability_verdicts(bad)
    assert stability_verdicts(bad, require_assumptions=False) == {"X0": "stable"}


@settings(max_examples=200)
@given(params_strategy)
def test_condition4_implies_negative_det_j12(p):
    j12_condition(p)  # raises AssertionError on sign disagreement


def test_branches():
    br = branch_pair(FIGURE_PARAMS)
    v = np.linspace(0.5, 5, 50)
    w = np.linspace(0.1, 3, 50)
    for u in (br.phi(v, w), br.psi(v, w)):
        f = reaction_rates(FIGURE_PARAMS.model(), np.stack([u, v, w]))[0]
        assert np.max(np.abs(f)) < 1e-13
    assert br.phi(br.crossing) == pytest.approx(0.0, abs=1e-15)
    assert np.array_equal(br.in_domain(v), v > 1 / 2.5)
    dv, dw = br.phi_grad(v)
    assert dv == pytest.approx(1 / v ** 2) and not np.any(dw)
    with pytest.raises(BranchDomainError):
        br.phi(np.array([1.0, 0.0]))

"""Exactness tests for scheme coefficients, stencils, and truncation errors."""

from fractions import Fraction as F

import numpy as np
import pytest

from dyndisc import lmm
from dyndisc.exceptions import TooFewSamples, UnsupportedOrder, UnsupportedSteps
from dyndisc.lmm import SchemeFamily
from dyndisc.models import trig_model

AB = SchemeFamily.ADAMS_BASHFORTH
AM = SchemeFamily.ADAMS_MOULTON
BDF = SchemeFamily.BDF

# golden table of classical coefficients; generation must reproduce it exactly
GOLDEN = {
    (AB, 1): ((F(1), F(-1)), (F(0), F(1))),
    (AB, 2): ((F(1), F(-1), F(0)), (F(0), F(3, 2), F(-1, 2))),
    (AB, 3): ((F(1), F(-1), F(0), F(0)), (F(0), F(23, 12), F(-16, 12), F(5, 12))),
    (AB, 4): (
        (F(1), F(-1), F(0), F(0), F(0)),
        (F(0), F(55, 24), F(-59, 24), F(37, 24), F(-9, 24)),
    ),
    (AB, 5): (
        (F(1), F(-1), F(0), F(0), F(0), F(0)),
        (F(0), F(1901, 720), F(-2774, 720), F(2616, 720), F(-1274, 720), F(251, 720)),
    ),
    (AB, 6): (
        (F(1), F(-1), F(0), F(0), F(0), F(0), F(0)),
        (
            F(0),
            F(4277, 1440),
            F(-7923, 1440),
            F(9982, 1440),
            F(-7298, 1440),
            F(2877, 1440),
            F(-475, 1440),
        ),
    ),
    (AM, 1): ((F(1), F(-1)), (F(1, 2), F(1, 2))),
    (AM, 2): ((F(1), F(-1), F(0)), (F(5, 12), F(8, 12), F(-1, 12))),
    (AM, 3): ((F(1), F(-1), F(0), F(0)), (F(9, 24), F(19, 24), F(-5, 24), F(1, 24))),
    (AM, 4): (
        (F(1), F(-1), F(0), F(0), F(0)),
        (F(251, 720), F(646, 720), F(-264, 720), F(106, 720), F(-19, 720)),
    ),
    (AM, 5): (
        (F(1), F(-1), F(0), F(0), F(0), F(0)),
        (
            F(95, 288),
            F(1427, 1440),
            F(-798, 1440),
            F(482, 1440),
            F(-173, 1440),
            F(27, 1440),
        ),
    ),
    (AM, 6): (
        (F(1), F(-1), F(0), F(0), F(0), F(0), F(0)),
        (
            F(19087, 60480),
            F(65112, 60480),
            F(-46461, 60480),
            F(37504, 60480),
            F(-20211, 60480),
            F(6312, 60480),
            F(-863, 60480),
        ),
    ),
    (BDF, 1): ((F(1), F(-1)), (F(1), F(0))),
    (BDF, 2): ((F(1), F(-4, 3), F(1, 3)), (F(2, 3), F(0), F(0))),
    (BDF, 3): (
        (F(1), F(-18, 11), F(9, 11), F(-2, 11)),
        (F(6, 11), F(0), F(0), F(0)),
    ),
    (BDF, 4): (
        (F(1), F(-48, 25), F(36, 25), F(-16, 25), F(3, 25)),
        (F(12, 25), F(0), F(0), F(0), F(0)),
    ),
    (BDF, 5): (
        (F(1), F(-300, 137), F(300, 137), F(-200, 137), F(75, 137), F(-12, 137)),
        (F(60, 137), F(0), F(0), F(0), F(0), F(0)),
    ),
    (BDF, 6): (
        (
            F(1),
            F(-360, 147),
            F(450, 147),
            F(-400, 147),
            F(225, 147),
            F(-72, 147),
            F(10, 147),
        ),
        (F(60, 147), F(0), F(0), F(0), F(0), F(0), F(0)),
    ),
}

ORDER = {AB: lambda M: M, AM: lambda M: M + 1, BDF: lambda M: M}


@pytest.mark.parametrize("family,M", sorted(GOLDEN, key=lambda k: (k[0].value, k[1])))
def test_golden_table(family, M):
    scheme = lmm.build_scheme(family, M)
    alpha, beta = GOLDEN[(family, M)]
    assert scheme.alpha == alpha
    assert scheme.beta == beta
    assert scheme.order == ORDER[family](M)


@pytest.mark.parametrize("family", list(SchemeFamily))
@pytest.mark.parametrize("M", range(1, 7))
def test_order_conditions_exact(family, M):
    scheme = lmm.build_scheme(family, M)
    p = scheme.order
    res = lmm.order_condition_residuals(scheme, p + 1)
    assert all(c == 0 for c in res[: p + 1])
    assert res[p + 1] != 0


@pytest.mark.parametrize("family", list(SchemeFamily))
@pytest.mark.parametrize("M", range(1, 7))
def test_family_structure(family, M):
    scheme = lmm.build_scheme(family, M)
    assert scheme.alpha[0] == 1
    assert sum(scheme.alpha) == 0
    if family is AB:
        assert scheme.beta[0] == 0
    else:
        assert scheme.beta[0] != 0
    if family is BDF:
        assert all(b == 0 for b in scheme.beta[1:])


def test_forward_euler_residuals():
    # hand Taylor computation: tau = (h/2) x'' + ..., so C_2 = +1
    scheme = lmm.build_scheme(AB, 1)
    assert lmm.order_condition_residuals(scheme, 2) == [0, 0, 1]


def test_bdf2_residuals():
    scheme = lmm.build_scheme(BDF, 2)
    res = lmm.order_condition_residuals(scheme, 3)
    assert res[:3] == [0, 0, 0] and res[3] != 0


def test_zero_beta_is_inconsistent():
    fake = lmm.LmmScheme(AB, 1, (F(1), F(-1)), (F(0), F(0)), 1)
    assert lmm.order_condition_residuals(fake, 1)[1] == 1


def test_build_scheme_rejects_bad_steps():
    with pytest.raises(UnsupportedSteps):
        lmm.build_scheme(AB, 0)
    with pytest.raises(UnsupportedSteps):
        lmm.build_scheme(BDF, 7)


@pytest.mark.parametrize(
    "family,M,N,expected",
    [
        (AB, 2, 10, (0, 9, 10, 1)),
        (BDF, 3, 10, (3, 10, 8, 0)),
        (AM, 1, 10, (0, 10, 11, 1)),
    ],
)
def test_scheme_indices_examples(family, M, N, expected):
    idx = lmm.scheme_indices(lmm.build_scheme(family, M), N)
    assert (idx.first, idx.last, idx.count, idx.aux_count) == expected


@pytest.mark.parametrize("family", list(SchemeFamily))
@pytest.mark.parametrize("M", range(1, 7))
def test_scheme_indices_consistency(family, M):
    scheme = lmm.build_scheme(family, M)
    for N in range(M, 40):
        idx = lmm.scheme_indices(scheme, N)
        assert idx.count == idx.last - idx.first + 1
        assert idx.aux_count == idx.count - (N - M + 1)
        assert idx.aux_count >= 0
    with pytest.raises(TooFewSamples):
        lmm.scheme_indices(scheme, M - 1)


@pytest.mark.parametrize(
    "p,expected",
    [
        (1, (F(-1), F(1))),
        (2, (F(-3, 2), F(2), F(-1, 2))),
        (4, (F(-25, 12), F(4), F(-3), F(4, 3), F(-1, 4))),
    ],
)
def test_fdm_stencil_values(p, expected):
    assert lmm.fdm_stencil(p).gamma == expected


@pytest.mark.parametrize("p", range(1, 8))
def test_fdm_moment_conditions(p):
    gamma = lmm.fdm_stencil(p).gamma
    assert sum(gamma) == 0
    assert sum(F(m) * g for m, g in enumerate(gamma)) == 1
    for k in range(2, p + 1):
        assert sum(F(m) ** k * g for m, g in enumerate(gamma)) == 0


@pytest.mark.parametrize("p", range(1, 8))
def test_fdm_differentiates_monomials(p):
    # exact rational derivative of t^k at a generic rational point
    t0, h = F(3, 7), F(1, 5)
    gamma = lmm.fdm_stencil(p).gamma
    for k in range(p + 1):
        approx = sum(g * (t0 + m * h) ** k for m, g in enumerate(gamma)) / h
        assert approx == k * t0 ** (k - 1) if k >= 1 else approx == 0


def test_fdm_rejects_bad_order():
    with pytest.raises(UnsupportedOrder):
        lmm.fdm_stencil(0)
    with pytest.raises(UnsupportedOrder):
        lmm.fdm_stencil(8)


def test_truncation_zero_on_linear_path():
    x = lambda t: np.array([t, 2.0 * t, -t])
    f = lambda x: np.array([1.0, 2.0, -1.0])
    for family in SchemeFamily:
        for M in (1, 2, 3):
            scheme = lmm.build_scheme(family, M)
            tau = lmm.local_truncation_error(scheme, x, f, h=0.1, n=5)
            assert np.max(np.abs(tau)) < 1e-12


def test_truncation_forward_euler_quadratic():
    # x = t^2: tau = (x_n - x_{n-1})/h - 2 t_{n-1} = h exactly
    scheme = lmm.build_scheme(AB, 1)
    x = lambda t: np.array([t * t])
    f = lambda x: 2.0 * np.sqrt(np.abs(x))
    for h in (0.5, 0.25, 0.03125):
        for n in (1, 4, 9):
            tau = lmm.local_truncation_error(scheme, x, f, h, n)
            assert tau[0] == pytest.approx(h, rel=1e-12)


@pytest.mark.parametrize("family", list(SchemeFamily))
def test_truncation_slope_matches_order(family):
    # log-log slope fit (np.polyfit) of max truncation error on the trig
    # model; the window starts at 2^-6 because the tan component is still
    # pre-asymptotic at coarser h (its high derivatives blow up toward t=1)
    from dyndisc.assembly import truncation_residuals
    from dyndisc.models import sample_model

    model = trig_model()
    scheme = lmm.build_scheme(family, 2)
    hs = [2.0**-k for k in range(6, 12)]
    errs = []
    for h in hs:
        data = sample_model(model, int(round(1.0 / h)))
        errs.append(np.max(np.abs(truncation_residuals(scheme, data, model.field))))
    slope = np.polyfit(np.log10(hs), np.log10(errs), 1)[0]
    assert abs(slope - scheme.order) < 0.1


def test_truncation_residuals_match_pointwise_definition():
    from dyndisc.assembly import truncation_residuals
    from dyndisc.models import sample_model

    model = trig_model()
    scheme = lmm.build_scheme(BDF, 2)
    h = 2.0**-4
    N = 16
    data = sample_model(model, N)
    fast = truncation_residuals(scheme, data, model.field)
    for n in range(scheme.steps, N + 1):
        slow = lmm.local_truncation_error(scheme, model.analytic_state, model.field, h, n)
        np.testing.assert_allclose(fast[n - scheme.steps], slow, rtol=0, atol=1e-11)

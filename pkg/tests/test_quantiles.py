import math
from fractions import Fraction as Fr

import numpy as np
import pytest
from scipy import integrate, stats

from hetcompat.errors import DomainError, InputError, NotDominated
from hetcompat.measure import build_measure
from hetcompat.quantiles import (
    ChiSquare1Quantile,
    ConstantQuantile,
    LogNormalQuantile,
    NormalQuantile,
    TabulatedQuantile,
    from_spec,
    normal_quantile,
    quantile_of_density,
)

from oracles import bisect_normal_quantile, space


@pytest.mark.parametrize("u", [1e-300, 1e-20, 1e-8, 0.001, 0.02425, 0.1, 0.3, 0.5, 0.7, 0.975, 0.99, 1 - 1e-10])
def test_normal_quantile_against_bisection(u):
    ref = bisect_normal_quantile(u)
    assert abs(normal_quantile(u) - ref) <= 4e-15 * max(1.0, abs(ref))


def test_normal_quantile_vectorised_and_symmetric():
    u = np.linspace(0.001, 0.999, 999)
    q = normal_quantile(u)
    assert np.all(np.diff(q) > 0)
    assert np.max(np.abs(q + normal_quantile(1 - u))) < 1e-13
    assert normal_quantile(0.5) == 0.0
    assert abs(normal_quantile(0.975) - 1.959963984540054) < 1e-15


@pytest.mark.parametrize("bad", [0.0, 1.0, -0.1, 1.5, math.nan])
def test_normal_quantile_domain(bad):
    with pytest.raises(DomainError):
        normal_quantile(bad)


@pytest.mark.parametrize(
    "G, ref",
    [
        (NormalQuantile(0.3, 2.0), stats.norm(0.3, 2.0)),
        (LogNormalQuantile(-0.5, 1.0), stats.lognorm(1.0, scale=math.exp(-0.5))),
        (ChiSquare1Quantile(), stats.chi2(1)),
    ],
)
def test_closed_form_partial_integrals(G, ref):
    for u in (0.05, 0.3, 0.5, 0.8, 0.999):
        x = ref.ppf(u)
        assert abs(G.ppf(u) - x) <= 1e-9 * max(1.0, abs(x))
        # int_0^u F^-1 = E[X; X <= F^-1(u)]
        direct = integrate.quad(lambda y: y * ref.pdf(y), ref.support()[0], x, limit=200)[0]
        assert abs(G.cumint(u) - direct) < 1e-8
    assert abs(G.mean() - ref.mean()) < 1e-12


def test_constant():
    c = ConstantQuantile(Fr(3, 2))
    assert c.ppf(0.2) == 1.5
    assert c.integral(Fr(1, 4), Fr(3, 4)) == Fr(3, 4)


def test_tabulated_left_continuous():
    T = TabulatedQuantile([Fr(2), Fr(0), Fr(2), Fr(5)], [Fr(1, 4), Fr(1, 2), Fr(0), Fr(1, 4)])
    assert T.values == (0, 2, 5) and T.probs == (Fr(1, 2), Fr(1, 4), Fr(1, 4))
    assert T.ppf(0.5) == 0.0 and T.ppf(0.5000001) == 2.0 and T.ppf(0.75) == 2.0 and T.ppf(0.76) == 5.0
    assert T.cumint(Fr(5, 8)) == Fr(1, 4)
    assert T.mean() == Fr(7, 4)
    assert T.exact
    assert abs(T.cumint(0.625) - 0.25) < 1e-15


def test_tabulated_errors():
    with pytest.raises(InputError):
        TabulatedQuantile([1, 2], [Fr(1, 2)])
    with pytest.raises(InputError):
        TabulatedQuantile([1, 2], [Fr(1, 2), Fr(1, 3)])
    with pytest.raises(InputError):
        TabulatedQuantile([1, 2], [Fr(3, 2), Fr(-1, 2)])


def test_quantile_of_density():
    U = build_measure(space(2), ["1/2", "1/2"])
    H = quantile_of_density(U, U)
    assert H.values == (1,) and H.probs == (1,)
    H = quantile_of_density(build_measure(space(2), ["3/4", "1/4"]), U)
    assert H.values == (Fr(1, 2), Fr(3, 2)) and H.probs == (Fr(1, 2), Fr(1, 2))
    assert H.mean() == 1
    with pytest.raises(NotDominated):
        quantile_of_density(build_measure(space(2), ["1/2", "1/2"]), build_measure(space(2), ["1", "0"]))


def test_from_spec():
    assert isinstance(from_spec({"kind": "normal"}), NormalQuantile)
    T = from_spec({"kind": "tabulated", "values": ["0", "1"], "probs": ["1/3", "2/3"]})
    assert T.exact and T.mean() == Fr(2, 3)
    with pytest.raises(InputError):
        from_spec({"kind": "cauchy"})

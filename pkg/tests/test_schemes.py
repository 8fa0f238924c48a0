from fractions import Fraction as Fr

import numpy as np
import pytest

from multideriv.schemes import (
    check_a_stability,
    check_l_stability,
    fourth_order,
    generate_scheme,
    pade_check,
    scheme_by_name,
    stability_function,
    step_linear_ode,
    third_order,
)


def test_third_order_coefficients():
    assert third_order().exact == (Fr(1, 3), Fr(2, 3), Fr(0), Fr(-1, 6))


def test_fourth_order_coefficients():
    assert fourth_order().exact == (Fr(1, 2), Fr(1, 2), Fr(1, 12), Fr(-1, 12))


def test_trapezoid_special_case():
    s = generate_scheme(1, 1)
    assert s.exact[:2] == (Fr(1, 2), Fr(1, 2)) and s.order == 2


@pytest.mark.parametrize("kl", [(0, 3), (3, 3), (1, 0)])
def test_unsupported_pairs(kl):
    with pytest.raises(ValueError):
        generate_scheme(*kl)


def test_stability_function_third():
    R = stability_function(third_order())
    assert np.allclose(R.numerator, [1, 1 / 3, 0])
    assert np.allclose(R.denominator, [1, -2 / 3, 1 / 6])
    assert pade_check(R, 1, 2) < 1e-15


def test_stability_function_fourth():
    R = stability_function(fourth_order())
    assert np.allclose(R.numerator, [1, 1 / 2, 1 / 12])
    assert np.allclose(R.denominator, [1, -1 / 2, 1 / 12])
    assert pade_check(R, 2, 2) < 1e-15


def test_stability_verdicts():
    R3, R4 = stability_function(third_order()), stability_function(fourth_order())
    assert check_a_stability(R3).stable and check_a_stability(R4).stable
    assert check_l_stability(R3) is True
    assert check_l_stability(R4) is False
    assert abs(R4(-1e8)) == pytest.approx(1.0, rel=1e-6)


@pytest.mark.parametrize("mu", [-0.5, -3.0, 0.2 + 1j])
def test_step_matches_stability_function(mu):
    s = third_order()
    y1 = step_linear_ode(1.0, mu, 1.0, s)
    assert y1 == pytest.approx(stability_function(s)(mu), abs=1e-14)


@pytest.mark.parametrize("scheme, order", [(third_order(), 3), (fourth_order(), 4)])
def test_order_on_linear_ode(scheme, order):
    errs = []
    for n in (10, 20, 40):
        y = 1.0
        for _ in range(n):
            y = step_linear_ode(y, -1.0, 1.0 / n, scheme)
        errs.append(abs(y - np.exp(-1.0)))
    rates = np.log2(np.array(errs[:-1]) / errs[1:])
    assert rates.min() > order - 0.1


def test_scheme_by_name():
    assert scheme_by_name("third") == third_order()
    assert scheme_by_name("2,2") == fourth_order()
    with pytest.raises(ValueError):
        scheme_by_name("fifth")

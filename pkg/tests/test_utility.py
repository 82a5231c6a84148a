import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weakinfo.errors import ValidationError
from weakinfo.utility import UtilitySpec, duality_check, load_utility_table, parse_utility, validate_utility

GRID = np.geomspace(1e-3, 1e3, 25)


@pytest.mark.parametrize("utility", [UtilitySpec.log(), UtilitySpec.power(0.5), UtilitySpec.power(0.2)])
def test_standard_utilities_validate(utility):
    check = validate_utility(utility)
    assert check.ok
    assert check.inverse_error <= 1e-10


def test_nonpositive_wealth_is_minus_infinity():
    u = UtilitySpec.power(0.5)
    assert u.value(0.0) == -math.inf
    assert np.all(u.value(np.array([-1.0, 0.0])) == -np.inf)


def test_power_range():
    with pytest.raises(ValidationError):
        UtilitySpec.power(1.0)


def test_log_duality_closed_form():
    u = UtilitySpec.log()
    y = GRID
    assert np.allclose(u.conjugate(y), -np.log(y) - 1, rtol=0, atol=1e-12)
    report = duality_check(u, y)
    assert report.ok
    assert report.argmax_gap < 1e-6


def test_power_duality_argmax():
    a = 0.5
    u = UtilitySpec.power(a)
    assert np.allclose(u.inverse_marginal(GRID), GRID ** (1 / (a - 1)), rtol=1e-14)
    assert duality_check(u, GRID).ok


@settings(max_examples=25, deadline=None)
@given(
    st.lists(st.floats(0.1, 3.0), min_size=1, max_size=3),
    st.lists(st.floats(0.3, 4.0), min_size=3, max_size=3),
)
def test_mixture_duality(weights, gammas):
    u = UtilitySpec.mixture(weights, gammas[: len(weights)])
    assert validate_utility(u).ok
    assert duality_check(u, np.geomspace(1e-2, 1e2, 7)).ok


def test_table_utility_matches_log(tmp_path):
    x = np.geomspace(1e-4, 1e4, 400)
    path = tmp_path / "u.csv"
    rows = ["x,U,dU"] + [f"{v!r},{math.log(v)!r},{1 / v!r}" for v in x.tolist()]
    path.write_text("\n".join(rows) + "\n")
    u = load_utility_table(path)
    check = validate_utility(u)
    assert check.ok
    probe = np.geomspace(1e-2, 1e2, 9)
    assert np.allclose(u.value(probe), np.log(probe), atol=1e-6)
    assert np.allclose(u.inverse_marginal(1 / probe), probe, rtol=1e-6)
    # tails keep the Inada limits
    assert u.inverse_marginal(1e12) < 1e-6 and u.inverse_marginal(1e-12) > 1e6


def test_table_rejects_convex_rows():
    with pytest.raises(ValidationError):
        UtilitySpec.from_table([1, 2, 3], [1, 2, 3], [1, 1, 1])


def test_parse_utility(tmp_path):
    assert parse_utility("log").tag == "log"
    assert parse_utility("power:0.5").alpha == 0.5
    with pytest.raises(ValidationError):
        parse_utility("power:abc")
    with pytest.raises(ValidationError, match="nope.csv"):
        parse_utility(f"table:{tmp_path / 'nope.csv'}")
    with pytest.raises(ValidationError):
        parse_utility("exp")


def test_custom_utility_without_derivative():
    u = UtilitySpec.custom(np.sqrt, lambda y: 0.25 / y**2)
    check = validate_utility(u)
    assert check.ok
    assert check.inverse_tol == 1e-6


def test_inada_failure_detected():
    u = UtilitySpec.custom(np.log1p, lambda y: 1 / y - 1, lambda x: 1 / (1 + x))
    assert not validate_utility(u).inada

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pathmed import Coefficients, pathway_effects, standardize
from pathmed.effects import mspe, predicted_values

from conftest import random_raw


def hand_coef():
    # beta theta = (2, 0); zeta pi = (0, 3); beta Lambda pi picks (1, 2)
    return Coefficients(beta=[1.0, 0.0], theta=[2.0, 5.0], zeta=[0.0, 1.0], pi=[4.0, 3.0],
                        lam=[[0.0, 0.5], [7.0, 0.0]], delta=0.25)


def test_hand_computed_totals():
    e = pathway_effects(hand_coef())
    assert (e.ie1_total, e.ie2_total, e.ie12_total, e.de) == (2.0, 3.0, 1.5, 0.25)
    assert e.te == 6.75 and e.ie_total == 6.5


def test_ranked_paths_order_and_labels():
    rows = pathway_effects(hand_coef()).ranked_paths(["a", "b"], ["c", "d"])
    assert [r["effect"] for r in rows] == [3.0, 2.0, 1.5]
    assert rows[0] == {"type": "IE2", "path": ["X", "d", "Y"], "k": 2, "effect": 3.0}
    assert rows[2]["path"] == ["X", "a", "d", "Y"] and (rows[2]["j"], rows[2]["k"]) == (1, 2)


def test_default_labels():
    rows = pathway_effects(hand_coef()).ranked_paths()
    assert rows[1]["path"] == ["X", "M1_1", "Y"]


@given(st.floats(-5, 5), st.floats(-5, 5))
def test_linear_in_contrast(x, x_star):
    e = pathway_effects(hand_coef(), x, x_star)
    unit = pathway_effects(hand_coef())
    assert e.te == pytest.approx(unit.te * (x - x_star), abs=1e-12)
    np.testing.assert_allclose(e.ie12_per_path, unit.ie12_per_path * (x - x_star), atol=1e-12)


def test_scaling_applies_back_transform(rng):
    raw = random_raw(rng)
    data = standardize(raw)
    coef = hand_coef_like(rng, raw.p1, raw.p2)
    direct = pathway_effects(coef.to_original_scale(data.scaling))
    via = pathway_effects(coef, scaling=data.scaling)
    assert via.te == pytest.approx(direct.te, rel=1e-14)
    # indirect effects of a unit exposure change rescale by sd(y) / sd(x)
    std = pathway_effects(coef)
    assert via.ie_total == pytest.approx(std.ie_total * data.scaling.y_sd / data.scaling.x_sd, rel=1e-12)


def hand_coef_like(rng, p1, p2):
    return Coefficients(rng.normal(size=p1), rng.normal(size=p1), rng.normal(size=p2), rng.normal(size=p2),
                        rng.normal(size=(p1, p2)), rng.normal())


def test_predicted_values_sum_to_indirect_effect():
    x = np.array([-1.0, 0.0, 2.0])
    v1, v2, v3, v = predicted_values(hand_coef(), x)
    np.testing.assert_array_equal(v1, 2.0 * x)
    np.testing.assert_array_equal(v, 6.5 * x)


def test_mspe():
    c = hand_coef()
    x = np.array([1.0, -2.0])
    assert mspe(c, c, x) == 0.0
    zero = Coefficients.zeros(2, 2)
    assert mspe(zero, c, x) == pytest.approx(6.5 ** 2 * 2.5)

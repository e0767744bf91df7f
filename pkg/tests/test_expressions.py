import numpy as np
import pytest
import sympy as sp

from magcgo import expressions as ex


@pytest.mark.parametrize("text", ["__import__('os')", "open('x')", "y + 1", "log(x1)", "x1 +"])
def test_rejects_unsafe_or_unknown(text):
    with pytest.raises(ex.ExpressionError):
        ex.parse(text)


def test_compile_scalar_matches_numpy():
    f = ex.compile_scalar(ex.parse("exp(x1)*sin(x2) + x3**2"))
    x = np.random.default_rng(0).normal(size=(5, 3))
    assert np.allclose(f(x), np.exp(x[:, 0]) * np.sin(x[:, 1]) + x[:, 2] ** 2)


def test_constant_broadcasts():
    f = ex.compile_scalar(ex.parse("2"))
    assert f(np.zeros((4, 3))).shape == (4,)


def test_curl_of_gradient_is_zero():
    g = ex.gradient(ex.parse("x1*x2**2*exp(x3)"))
    assert all(sp.simplify(c) == 0 for c in ex.curl(g))


def test_divergence_of_curl_is_zero():
    v = [ex.parse(t) for t in ("x2*x3", "sin(x1)", "x1*x2**2")]
    assert sp.simplify(ex.divergence(ex.curl(v))) == 0

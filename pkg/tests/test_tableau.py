from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from srk import tableau as tb

LABELS = {
    # name: (mode, pD, pS)
    "EM": ("general-ito", 1, 0.5),
    "SRI2s1": ("general-ito", 1, 1.0),
    "SRI2s2": ("general-ito", 2, 1.0),
    "SRA2s1": ("additive", 1, 1.0),
    "SRA2s2": ("additive", 2, 1.0),
    "SSBE": ("general-ito", 1, 0.5),
}


@pytest.mark.parametrize("name", sorted(LABELS))
def test_builtin_labels_exact(name):
    mode, pD, pS = LABELS[name]
    r = tb.check_order_conditions(tb.builtin(name), mode, exact=True)
    assert (r.pD, r.pS) == (pD, pS)
    assert r.noise_mode == mode


@pytest.mark.parametrize("name", tb.BUILTIN_NAMES)
@pytest.mark.parametrize("mode", tb.NOISE_MODES)
def test_float_agrees_with_exact(name, mode):
    t = tb.builtin(name)
    a = tb.check_order_conditions(t, mode, exact=True)
    b = tb.check_order_conditions(t, mode)
    assert (a.pS, a.pD) == (b.pS, b.pD)
    for ca, cb in zip(a.conditions, b.conditions):
        assert ca.id == cb.id
        assert abs(float(ca.lhs) - cb.lhs) <= 1e-12


def test_sri2s1_all_six_conditions():
    r = tb.check_order_conditions(tb.builtin("SRI2s1"), "general-ito", exact=True)
    stoch = [c for c in r.conditions if not c.id.startswith("det:")]
    assert [c.id for c in stoch] == ["alpha.e", "beta1.e", "beta2.e", "beta2.c1", "beta2.A1e", "beta2.B1e"]
    assert all(c.satisfied for c in stoch)
    assert [c.required for c in stoch] == [1, 1, 0, 0, 0, 1]


def test_b1_zeroed_demotes_to_half():
    t = tb.builtin("SRI2s1").replace(B1=[[0, 0], [0, 0]])
    r = tb.check_order_conditions(t, "general-ito", exact=True)
    assert r.pS == 0.5
    assert [c.id for c in r.failed(stochastic_only=True)] == ["beta2.B1e"]


def test_stratonovich_without_order_one_has_no_order():
    r = tb.check_order_conditions(tb.builtin("EM"), "general-strat", exact=True)
    assert r.pS is None


def test_builtin_coefficients():
    t = tb.builtin("SRI2s1")
    assert t.beta2 == (Fraction(-1), Fraction(1))
    assert t.B1[1][0] == 1 and t.explicit
    t2 = tb.builtin("SRI2s2")
    assert t2.alpha == (Fraction(1, 2), Fraction(1, 2)) and t2.A0[1][0] == 1 and t2.c0 == (0, 1)
    ssbe = tb.builtin("SSBE")
    assert not ssbe.explicit
    assert ssbe.A0 == ((1,),) and ssbe.A1 == ((1,),) and ssbe.c0 == (1,) and ssbe.c1 == (1,)


def test_unknown_builtin():
    with pytest.raises(KeyError):
        tb.builtin("RK4")


def test_b1_upper_rejected():
    with pytest.raises(ValueError, match="B1 not strictly lower triangular"):
        tb.ExtendedTableau(s=1, alpha=[1], beta1=[1], B1=[[1]])


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        tb.ExtendedTableau(s=2, alpha=[1], beta1=[1, 0])
    with pytest.raises(ValueError):
        tb.ExtendedTableau(s=2, alpha=[1, 0], beta1=[1, 0], A0=[[0, 0]])


def test_non_finite_rejected():
    with pytest.raises(ValueError):
        tb.ExtendedTableau(s=1, alpha=[float("inf")], beta1=[1])


def test_unknown_mode():
    with pytest.raises(ValueError):
        tb.check_order_conditions(tb.builtin("EM"), "weak")


@pytest.mark.parametrize("name", tb.BUILTIN_NAMES)
def test_round_trip(name):
    t = tb.builtin(name)
    assert tb.parse_tableau(tb.serialize_tableau(t)) == t


def test_parse_rationals_and_comments():
    text = """
    # Heun drift, additive noise
    s = 2
    alpha = [1/2, 0.5]
    beta1 = [1, 0]
    c0 = [0, 1]
    A0 = [[0, 0],
          [1, 0]]
    """
    t = tb.parse_tableau(text)
    assert t == tb.builtin("SRA2s2").replace(name="")
    assert t.noise_mode_hint == "additive"
    assert t.beta2 == (0, 0)


def test_parse_b1_diagonal_rejected():
    with pytest.raises(ValueError, match="B1 not strictly lower triangular"):
        tb.parse_tableau("s = 1\nalpha = [1]\nbeta1 = [1]\nbeta2 = [0]\nB1 = [[1]]\n")


@pytest.mark.parametrize("text", [
    "s = 2\nalpha = [1, 0]\n",              # missing beta1
    "alpha = [1]\nbeta1 = [1]\n",           # missing s
    "s = 1\nalpha = [1]\nbeta1 = [1]\ngamma = [2]\n",  # unknown key
    "s = 1\nalpha = [1\nbeta1 = [1]\n",     # unbalanced
    "s = 0\nalpha = []\nbeta1 = []\n",
])
def test_parse_errors(text):
    with pytest.raises(tb.TableauFormatError):
        tb.parse_tableau(text)


_frac = st.fractions(min_value=-3, max_value=3, max_denominator=6)


@settings(max_examples=60, deadline=None)
@given(alpha=_frac, beta1=_frac, beta2=_frac, a1=_frac, c1=_frac)
def test_single_stage_never_order_one(alpha, beta1, beta2, a1, c1):
    t = tb.ExtendedTableau(s=1, alpha=[alpha], beta1=[beta1], beta2=[beta2], A1=[[a1]], c1=[c1])
    r = tb.check_order_conditions(t, "general-ito", exact=True)
    assert r.pS in (0.5, None)


@settings(max_examples=60, deadline=None)
@given(st.lists(_frac, min_size=10, max_size=10))
def test_round_trip_random_two_stage(v):
    t = tb.ExtendedTableau(s=2, alpha=v[0:2], beta1=v[2:4], beta2=v[4:6], c0=v[6:8], c1=v[8:10],
                           B1=[[0, 0], [v[0], 0]], A0=[[v[1], 0], [v[2], v[3]]], name="r")
    assert tb.parse_tableau(tb.serialize_tableau(t)) == t


@settings(max_examples=60, deadline=None)
@given(st.lists(_frac, min_size=6, max_size=6))
def test_report_invariants(v):
    t = tb.ExtendedTableau(s=2, alpha=v[0:2], beta1=v[2:4], beta2=v[4:6], B1=[[0, 0], [1, 0]])
    r = tb.check_order_conditions(t, "general-ito", exact=True)
    sat = {c.id: c.satisfied for c in r.conditions}
    half = all(sat[k] for k in ("alpha.e", "beta1.e", "beta2.e", "beta2.c1", "beta2.A1e"))
    if r.pS == 1.0:
        assert half and sat["beta2.B1e"]
    if r.pS == 0.5:
        assert half


def test_arrays_are_float():
    ar = tb.builtin("SRI2s2").arrays
    assert ar["A0"].dtype == np.float64 and ar["A0"][1, 0] == 1.0

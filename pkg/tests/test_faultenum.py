from fractions import Fraction
import json

import pytest

from magicprep.faultenum import (
    DETECTED,
    HARMLESS,
    LOGICAL,
    TYPE_ANGLES,
    coefficient_table,
    enumerate_coefficients,
    golden_coefficients,
    predict_first_order,
)
from magicprep.noise import NoiseParams


def test_d3_cnot_values():
    h = enumerate_coefficients(3, "CNOT", "H_TYPE", 1)
    t = enumerate_coefficients(3, "CNOT", "T_TYPE", 1)
    assert h.coefficients() == {"a": Fraction(2, 3), "b": Fraction(94, 15), "c": Fraction(1)}
    assert t.a == Fraction(5, 3) and t.b == Fraction(94, 15) and t.c == 1
    assert h.m == 0


@pytest.mark.parametrize("d", [5, 7])
def test_b_formulas(d):
    assert enumerate_coefficients(d, "CNOT", "H_TYPE", 1).b == Fraction(38, 15) + Fraction(4 * d, 3)
    assert enumerate_coefficients(d, "CNOT", "H_TYPE", 2).b == Fraction(2, 15) + Fraction(4 * d, 5)


@pytest.mark.parametrize("d", [3, 5])
def test_cz_a_formulas(d):
    assert enumerate_coefficients(d, "CZ", "H_TYPE", 1).a == Fraction(10, 3) + Fraction(4 * d, 3)
    assert enumerate_coefficients(d, "CZ", "T_TYPE", 1).a == Fraction(13, 3) + Fraction(4 * d, 3)
    assert enumerate_coefficients(d, "CZ", "H_TYPE", 2).a == Fraction(4, 3) + d
    assert enumerate_coefficients(d, "CZ", "T_TYPE", 2).a == Fraction(7, 3) + d


def test_table_matches_reference():
    cells = coefficient_table((3, 5), rounds=(1, 2))
    assert len(cells) == 16 and all(c.matches for c in cells)


def test_ledger_is_complete_and_shares_sum():
    rep = enumerate_coefficients(3, "CNOT", "T_TYPE", 1)
    assert {r.classification for r in rep.ledger} == {LOGICAL, DETECTED, HARMLESS}
    # total share per DEPOL2 site is 1
    per_site = {}
    for r in rep.ledger:
        if r.param == "p2":
            per_site[r.site] = per_site.get(r.site, 0) + r.share
    assert set(per_site.values()) == {Fraction(1)}
    # magic-qubit faults: T-type reset X, first SQRT_X non-Y terms, second SQRT_X all terms
    contrib = rep.contributions("p1")
    assert sum(contrib.values()) == rep.a
    assert contrib["SQRT_X"] == Fraction(5, 3)


def test_angles_within_type_give_same_coefficients():
    base = enumerate_coefficients(3, "CNOT", "T_TYPE", 1)
    other = enumerate_coefficients(3, "CNOT", "T_TYPE", 1, angles=(0.4, 2.1))
    assert base.coefficients() == other.coefficients()


def test_prediction_and_json():
    rep = enumerate_coefficients(3, "CNOT", "H_TYPE", 1)
    p = predict_first_order(rep, NoiseParams(uniform=1e-4))
    assert p == pytest.approx((2 / 3 + 94 / 15 + 1) * 1e-4)
    doc = json.loads(rep.to_json(with_ledger=False))
    assert doc["a"] == "2/3" and "ledger" not in doc


def test_golden_function():
    assert golden_coefficients("CNOT", "H_TYPE", 3, 1)["b"] == Fraction(94, 15)
    assert golden_coefficients("CZ", "T_TYPE", 9, 2)["a"] == Fraction(7, 3) + 9


def test_invalid_inputs():
    with pytest.raises(ValueError):
        enumerate_coefficients(3, "ISWAP", "H_TYPE", 1)
    with pytest.raises(ValueError):
        enumerate_coefficients(3, "CNOT", "H_TYPE", 3)
    assert set(TYPE_ANGLES) == {"H_TYPE", "T_TYPE"}

import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings, strategies as st

from cstkit.detection import (AuditConfig, DiscriminationReport, decide, negative_rate, run_cf,
                              run_cst, run_cst_grid, run_st, wald_ci, z_value)
from cstkit.metric import AttributeSchema
from cstkit.scm import (Assignment, NodeSpec, NoiseSpec, Scm, ThresholdClassifier,
                        generate_counterfactual_dataset)

SCHEMA_X = AttributeSchema.simple(["X"], {"A": 1})
STEP = ThresholdClassifier({"X": 1.0}, 5.0)


def shift_scm(effect=-3.0):
    return Scm((NodeSpec("A", "protected", (), Assignment(), NoiseSpec("bernoulli", {"p": 0.5})),
                NodeSpec("X", "covariate", ("A",), Assignment(0.0, {"A": effect}),
                         NoiseSpec("normal", {"sigma": 1.0}))))


def frame(females, males):
    data = pd.DataFrame({"X": list(females) + list(males),
                         "A": [1] * len(females) + [0] * len(males)})
    data["Y"] = STEP(data)
    return data


# -- group statistics -------------------------------------------------------

def test_negative_rate_examples():
    assert negative_rate([0, 0, 1, 1]) == 0.5
    assert negative_rate([1, 1, 1], include_center=True, center_decision=0) == 0.25
    assert negative_rate(["no", "no", "yes"], positive="yes") == pytest.approx(2 / 3)
    with pytest.raises(ValueError):
        negative_rate([])
    with pytest.raises(ValueError):
        negative_rate([1], include_center=True)


def test_z_value():
    assert z_value(0.05) == pytest.approx(1.959964, abs=1e-6)


def test_wald_full_separation_is_degenerate():
    for k in (1, 15, 100):
        lo, hi, clamped = wald_ci(1.0, 0.0, k)
        assert (lo, hi, clamped) == (1.0, 1.0, False)


def test_wald_zero_radicand():
    assert tuple(wald_ci(0.5, 0.5, 20)) == (0.0, 0.0, False)


def test_wald_negative_radicand_is_clamped():
    lo, hi, clamped = wald_ci(0.9, 0.5, 10)
    assert clamped
    assert lo == hi == pytest.approx(0.4)
    # 0.5 * 0.5 - 0.9 * 0.1 > 0, so this ordering is not clamped
    lo, hi, clamped = wald_ci(0.5, 0.9, 10)
    assert not clamped
    assert (hi - lo) / 2 == pytest.approx(1.959964 * math.sqrt(0.16 / 10), abs=1e-6)


def test_wald_standard_sum_worked_value():
    lo, hi, _ = wald_ci(0.8125, 0.0, 16, variance_mode="standard-sum")
    w = (hi - lo) / 2
    assert w == pytest.approx(1.959963984540054 * math.sqrt(0.8125 * 0.1875 / 16), rel=1e-12)
    assert round(w, 4) in (0.1912, 0.1913)  # 0.191250 sits on the rounding edge


def test_wald_rejects_bad_input():
    with pytest.raises(ValueError):
        wald_ci(0.5, 0.5, 0)
    with pytest.raises(ValueError):
        wald_ci(0.5, 0.5, 5, variance_mode="pooled")


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 30), st.integers(0, 30), st.integers(1, 30),
       st.sampled_from(["as-written", "standard-sum"]))
def test_wald_properties(nc, nt, k, mode):
    p_c, p_t = min(nc, k) / k, min(nt, k) / k
    lo, hi, clamped = wald_ci(p_c, p_t, k, variance_mode=mode)
    assert lo <= hi
    assert (lo + hi) / 2 == pytest.approx(p_c - p_t, abs=1e-12)
    assert clamped == (mode == "as-written" and p_c * (1 - p_c) < p_t * (1 - p_t))
    disc, sig = decide(p_c - p_t, (lo, hi))
    assert not sig or disc


def test_decide_examples():
    assert decide(0.2, (0.05, 0.35)) == (True, True)
    assert decide(0.2, (-0.1, 0.5)) == (True, False)
    assert decide(0.0, (0.0, 0.0)) == (False, False)
    assert decide(0.1, (0.06, 0.14), tau=0.05) == (True, True)
    assert decide(0.05, (0.05, 0.05), tau=0.05) == (False, False)


def test_config_validation():
    for bad in ({"alpha": 0}, {"tau": -0.1}, {"k": 0}, {"variance_mode": "x"}, {"jobs": 0}):
        with pytest.raises(ValueError):
            AuditConfig(**bad)


# -- the two directions of the CF / CST relationship ------------------------

def test_cf_fair_but_cst_discriminated():
    # the complainant (row 0) stays rejected counterfactually (x 1 -> 4 < 5), but the
    # men around x = 4 mostly sit just past the boundary
    data = frame([1.0, 0.8, 1.2, 0.9], [4.5, 5.5, 6.0, 20.0, 30.0])
    cf = generate_counterfactual_dataset(shift_scm(), data, {"A": 0}, STEP)
    assert cf.loc[0, "X"] == pytest.approx(4.0)
    cfg = AuditConfig(k=3, intervention={"A": 0})
    cf_row = run_cf(data, cf, SCHEMA_X, cfg).rows.set_index("complainant_id").loc[0]
    cst_row = run_cst(data, cf, SCHEMA_X, cfg).rows.set_index("complainant_id").loc[0]
    assert not cf_row["discriminated"]
    assert cst_row["p_c"] == 1.0 and cst_row["p_t"] == pytest.approx(1 / 3)
    assert cst_row["discriminated"]


def test_cf_flagged_but_no_cst_gap():
    data = frame([4.5, 4.0, 4.2, 6.0], [4.8, 4.9, 10.5, 30.0])
    cf = generate_counterfactual_dataset(shift_scm(), data, {"A": 0}, STEP)
    assert cf.loc[0, "X"] == pytest.approx(7.5)
    cfg = AuditConfig(k=3, intervention={"A": 0})
    cf_row = run_cf(data, cf, SCHEMA_X, cfg).rows.set_index("complainant_id").loc[0]
    cst_row = run_cst(data, cf, SCHEMA_X, cfg).rows.set_index("complainant_id").loc[0]
    assert cf_row["discriminated"]
    assert cst_row["delta_p"] <= cfg.tau
    assert not cst_row["discriminated"]


# -- pipelines --------------------------------------------------------------

def tiny():
    # females at 0..4, males at 0.5..4.5; females rejected below 3, males below 1
    data = pd.DataFrame({"X": [0.0, 1, 2, 3, 4, 0.5, 1.5, 2.5, 3.5, 4.5],
                         "A": [1] * 5 + [0] * 5})
    data["Y"] = [0, 0, 0, 1, 1, 0, 1, 1, 1, 1]
    return data


def test_st_hand_enumeration():
    rep = run_st(tiny(), SCHEMA_X, AuditConfig(k=2))
    row = rep.rows.set_index("complainant_id").loc[1]
    # x = 1: women at 0 and 2 (both rejected); men at 0.5 and 1.5 (one rejected)
    assert (row["p_c"], row["p_t"], row["delta_p"]) == (1.0, 0.5, 0.5)
    assert row["discriminated"] and row["flags"] == "clamped"  # 0 - 0.25 < 0
    assert rep.n_protected == 5
    assert list(rep.rows["complainant_id"]) == [0, 1, 2, 3, 4]


def test_include_centers_adds_the_centers():
    data = tiny()
    cf = data.assign(A=0)
    cf["Y"] = [0, 1, 1, 1, 1, 0, 1, 1, 1, 1]
    rep = run_cst(data, cf, SCHEMA_X, AuditConfig(k=2, include_centers=True,
                                                  intervention={"A": 0}))
    row = rep.rows.set_index("complainant_id").loc[1]
    assert row["p_c"] == 1.0 and row["p_t"] == pytest.approx(1 / 3)
    assert row["n_ctr"] == 3 and row["n_tst"] == 3
    assert rep.method == "CST"


def test_identity_counterfactual_reduces_to_st():
    data = tiny()
    for k in (1, 2, 4):
        cfg = AuditConfig(k=k)
        st_rows = run_st(data, SCHEMA_X, cfg).rows
        cst_rows = run_cst(data, data.copy(), SCHEMA_X, cfg).rows
        pd.testing.assert_frame_equal(st_rows, cst_rows)


def test_short_groups_are_flagged():
    rep = run_st(tiny(), SCHEMA_X, AuditConfig(k=6))
    assert rep.rows["flags"].str.contains("short_control").all()
    assert rep.rows["flags"].str.contains("short_test").all()


def test_cf_rows():
    data = tiny()
    cf = data.assign(A=0, Y=1)
    rep = run_cf(data, cf, SCHEMA_X, AuditConfig(intervention={"A": 0}))
    assert rep.n_discriminated == 3 and rep.k is None
    assert rep.summary_line() == "3 (60%)"
    assert rep.rows["ci_low"].isna().all()


def test_misaligned_counterfactual():
    with pytest.raises(ValueError, match="aligned"):
        run_cst(tiny(), tiny().iloc[:-1], SCHEMA_X, AuditConfig())


def test_grid_matches_single_runs(loan_small):
    data, _, _, cf = loan_small
    from cstkit.scenarios import LOAN_SCHEMA
    cfg = AuditConfig(intervention={"A": 0})
    grid = run_cst_grid(data, cf, LOAN_SCHEMA, cfg, [5, 20])
    for rep in grid:
        single = run_cst(data, cf, LOAN_SCHEMA, AuditConfig(k=rep.k, intervention={"A": 0}))
        pd.testing.assert_frame_equal(rep.rows, single.rows)


def test_parallel_is_identical(loan_small):
    data, _, _, cf = loan_small
    from cstkit.scenarios import LOAN_SCHEMA
    one = run_cst(data, cf, LOAN_SCHEMA, AuditConfig(intervention={"A": 0}))
    two = run_cst(data, cf, LOAN_SCHEMA, AuditConfig(intervention={"A": 0}, jobs=2))
    assert one.to_csv().replace("jobs", "") == two.to_csv().replace("jobs", "")
    pd.testing.assert_frame_equal(one.rows, two.rows)


def test_report_csv_round_trip(loan_small):
    data, _, _, cf = loan_small
    from cstkit.scenarios import LOAN_SCHEMA
    rep = run_cst(data, cf, LOAN_SCHEMA, AuditConfig(k=10, intervention={"A": 0}))
    text = rep.to_csv()
    assert text.splitlines()[0] == ("complainant_id,p_c,p_t,delta_p,ci_low,ci_high,"
                                    "discriminated,significant,flags")
    back = DiscriminationReport.from_csv(text)
    assert back.method == rep.method and back.k == 10
    assert back.n_discriminated == rep.n_discriminated
    assert back.n_protected == rep.n_protected
    pd.testing.assert_frame_equal(back.rows, rep.rows.drop(columns=["n_ctr", "n_tst"]),
                                  check_dtype=False)
    assert back.to_csv() == text

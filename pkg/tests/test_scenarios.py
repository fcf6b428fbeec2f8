import numpy as np
import pandas as pd
import pytest

from cstkit.scenarios import (LAW_PSI, LAW_SCHEMA, LOAN_CLASSIFIER, SYNTHETIC_LAW_TRUTH,
                              build_law_school, generate_law_school_synthetic, generate_loan,
                              law_classifier, load_law_school_csv, loan_classifier, loan_scm)
from cstkit.scm import abduct, generate_counterfactual_dataset, intervene, predict, validate_scm


def test_loan_classifier_boundary():
    assert loan_classifier(150000, 15000) == 0  # exactly 225000
    assert loan_classifier(150000, 15000.01) == 1
    assert loan_classifier(0, 0) == 0
    frame = pd.DataFrame({"X1": [150000.0, 200000.0], "X2": [15000.0, 10000.0]})
    assert loan_classifier(frame).tolist() == [0, 1]


def test_law_classifier_boundary():
    assert LAW_PSI == pytest.approx(20.798)
    assert law_classifier(4.0, 48.0) == 1
    assert law_classifier(3.93, 46.1) == 0  # the cutoff itself is not admitted
    assert law_classifier(0.0, 0.0) == 0
    assert law_classifier(3.93, 46.11) == 1


def test_loan_scm_shape():
    scm = loan_scm()
    assert validate_scm(scm) == []
    assert scm.protected == ["A"]
    assert scm["X1"].assignment.penalties[0].factor.mean == 10
    assert scm["X2"].assignment.penalties[0].factor.mean == 4


def test_loan_generation_rates():
    data, _, _ = generate_loan(5000, seed=1)
    assert abs(data["A"].mean() - 0.45) <= 0.02
    assert set(data["Y"].unique()) <= {0, 1}


def test_loan_males_are_fixed_points(loan_small):
    data, _, _, cf = loan_small
    m = data["A"] == 0
    pd.testing.assert_frame_equal(cf[m], data[m])


def test_loan_counterfactual_is_monotone(loan_small):
    data, _, _, cf = loan_small
    f = data["A"] == 1
    assert (cf.loc[f, "X1"] >= data.loc[f, "X1"]).all()
    assert (cf.loc[f, "Y"] >= data.loc[f, "Y"]).all()


def test_loan_oracle_counterfactual_algebra(loan_small):
    data, scm, lat, cf = loan_small
    f = (data["A"] == 1).to_numpy()
    p1 = lat.factors["X1|A"].to_numpy()[f]
    p2 = lat.factors["X2|A"].to_numpy()[f]
    np.testing.assert_allclose(cf["X1"].to_numpy()[f], data["X1"].to_numpy()[f] + 1500 * p1)
    np.testing.assert_allclose(cf["X2"].to_numpy()[f],
                               data["X2"].to_numpy()[f] + 0.3 * 1500 * p1 + 300 * p2)


def test_loan_residual_counterfactual_uses_mean_penalties(loan_small):
    data, scm, _, _ = loan_small
    cf = generate_counterfactual_dataset(scm, data, {"A": 0}, LOAN_CLASSIFIER, "residual")
    f = data["A"] == 1
    np.testing.assert_allclose(cf.loc[f, "X1"], data.loc[f, "X1"] + 15000)
    np.testing.assert_allclose(cf.loc[f, "X2"], data.loc[f, "X2"] + 0.3 * 15000 + 1200)


def test_synthetic_law_school_valid_only():
    data, lat = generate_law_school_synthetic(3000, seed=3, valid_only=True)
    assert len(data) == len(lat.noise) == 3000
    assert data["UGPA"].between(0, 4).all()
    assert (data["LSAT"] > 0).all() and (data["LSAT"] <= 48).all()


def test_synthetic_law_school_marginals():
    data, _ = generate_law_school_synthetic(21790, seed=3)
    assert len(data) == 21790
    assert (data["LSAT"] > 0).all()
    assert abs(data["G"].mean() - 0.438) < 0.01
    assert abs(data["R"].mean() - 0.161) < 0.01


def test_law_school_fit_recovers_truth():
    raw, _ = generate_law_school_synthetic(21790, seed=4)
    scenario, data = build_law_school(raw)
    assert scenario.dropped == 0
    for name, truth in SYNTHETIC_LAW_TRUTH.items():
        a, se = scenario.scm[name].assignment, scenario.std_errors[name]
        assert abs(a.intercept - truth["intercept"]) < 3 * se["intercept"]
        for p in ("R", "G"):
            assert abs(a.coefficients[p] - truth[p]) < 3 * se[p]
    assert data["Y"].tolist() == law_classifier(data).tolist()


def test_law_school_round_trip():
    raw, _ = generate_law_school_synthetic(1000, seed=5)
    scenario, data = build_law_school(raw)
    cols = ["R", "G", "UGPA", "LSAT"]
    back = predict(scenario.scm, abduct(scenario.scm, data[cols]))
    np.testing.assert_allclose(back[cols].to_numpy(float), data[cols].to_numpy(float),
                               rtol=1e-9)


def test_law_school_drops_nonpositive_lsat():
    raw, _ = generate_law_school_synthetic(500, seed=6)
    raw.loc[:4, "LSAT"] = 0.0
    scenario, data = build_law_school(raw)
    assert scenario.dropped == 5 and len(data) == 495


def test_law_school_csv_loader(tmp_path):
    path = tmp_path / "law.csv"
    pd.DataFrame({"ugpa": [3.1, 2.9, 3.5], "LSAT": [40.0, 35.0, 44.0],
                  "Race": ["White", "Black", "Asian"], "Sex": ["F", "M", "f"]}
                 ).to_csv(path, index=False)
    out = load_law_school_csv(path)
    assert out["R"].tolist() == [0, 1, 1]
    assert out["G"].tolist() == [1, 0, 1]
    assert load_law_school_csv(path, lsat_scale=0.5)["LSAT"].tolist() == [20.0, 17.5, 22.0]
    with pytest.raises(KeyError):
        load_law_school_csv(path, race_column="ethnicity")


def test_law_school_needs_columns():
    with pytest.raises(KeyError):
        build_law_school(pd.DataFrame({"UGPA": [3.0], "R": [0], "G": [1]}))


def test_joint_intervention_on_law_school():
    raw, _ = generate_law_school_synthetic(300, seed=8)
    scenario, data = build_law_school(raw)
    scm = intervene(scenario.scm, {"R": 0, "G": 0})
    cf = predict(scm, abduct(scenario.scm, data[["R", "G", "UGPA", "LSAT"]]))
    assert (cf["R"] == 0).all() and (cf["G"] == 0).all()
    ref = data[(data["R"] == 0) & (data["G"] == 0)].index
    np.testing.assert_allclose(cf.loc[ref, "UGPA"], data.loc[ref, "UGPA"])

"""
Law-school admissions
=====================

Fit the admissions model to data, then ask what each non-white applicant's
outcome would have been had they been white. Without the public survey file
the synthetic stand-in is used.
"""

import warnings

from cstkit import AttributeSchema, AuditConfig, run_cf, run_cst_grid, run_st_grid
from cstkit.scenarios import (LAW_CLASSIFIER, SYNTHETIC_LAW_TRUTH, build_law_school,
                              generate_law_school_synthetic)
from cstkit.scm import generate_counterfactual_dataset

warnings.simplefilter("ignore")

raw, _ = generate_law_school_synthetic(21790, seed=0)
# with the survey CSV instead:
# raw = load_law_school_csv("law_data.csv", female_values=["Female"])
scenario, data = build_law_school(raw)

for name in ("UGPA", "LSAT"):
    a = scenario.scm[name].assignment
    print(name, round(a.intercept, 3), {p: round(v, 3) for p, v in a.coefficients.items()},
          "truth:", SYNTHETIC_LAW_TRUTH[name])

for col, label in (("G", "female"), ("R", "non-white")):
    g = data[col] == 1
    print(f"{label}: {100 * g.mean():.1f}% of applicants, admitted "
          f"{100 * data.loc[g, 'Y'].mean():.2f}% vs {100 * data.loc[~g, 'Y'].mean():.2f}%")

cf = generate_counterfactual_dataset(scenario.scm, data, {"R": 0}, LAW_CLASSIFIER)
schema = AttributeSchema.simple(["UGPA", "LSAT"], {"R": 1})
ks = [15, 50]
cfg = AuditConfig(intervention={"R": 0})
for label, reps in (("CST (w/o)", run_cst_grid(data, cf, schema, cfg, ks)),
                    ("ST", run_st_grid(data, schema, cfg, ks)),
                    ("CF", [run_cf(data, cf, schema, cfg)] * len(ks))):
    print(label, [r.summary_line() for r in reps])

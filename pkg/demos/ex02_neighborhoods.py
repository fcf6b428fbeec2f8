"""
Distances and k-nearest-neighbour groups
========================================

The mixed-type distance, the two search spaces and the control / test
groups built around a complainant and its counterfactual.
"""

import numpy as np

from cstkit import DistanceContext, build_groups, partition_search_spaces, tuple_distance
from cstkit.metric import attribute_ranges
from cstkit.scenarios import LOAN_CLASSIFIER, LOAN_SCHEMA, generate_loan
from cstkit.scm import generate_counterfactual_dataset

data, scm, latents = generate_loan(2000, seed=1)
cf = generate_counterfactual_dataset(scm, data, {"A": 0}, LOAN_CLASSIFIER, "oracle", latents)

# numeric attributes are scaled by their observed range, so a salary gap of
# 15796 on a 0..200000 range is worth 0.079; the tuple distance is the mean
ranges = attribute_ranges(data, LOAN_SCHEMA)
print(ranges.bounds)
print(tuple_distance(data.iloc[0], data.iloc[1], LOAN_SCHEMA, ranges))

# women are complainants and form the control space; men form the test space
spaces = partition_search_spaces(data, {"A": 1})
print(len(spaces.control), "women,", len(spaces.test), "men")

# a rejected woman whose counterfactual self would have been approved
ctx = DistanceContext(LOAN_SCHEMA, data)
f = spaces.control
c = int(f[(data["Y"].to_numpy()[f] == 0) & (cf["Y"].to_numpy()[f] == 1)][0])
print("factual:", data.iloc[c].to_dict())
print("counterfactual:", cf.iloc[c].to_dict())

ctr, tst = build_groups(c, data, cf, spaces, 15, ctx)
# control group: women like her; test group: men like her counterfactual self
print("control rejections:", int((data["Y"].to_numpy()[ctr.indices] == 0).sum()), "of 15")
print("test rejections:   ", int((data["Y"].to_numpy()[tst.indices] == 0).sum()), "of 15")
print("distances:", np.round(ctr.distances[:5], 4), np.round(tst.distances[:5], 4))

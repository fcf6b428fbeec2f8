"""
Confidence intervals for the rejection-rate gap
===============================================
"""

from cstkit import decide, wald_ci

# full separation: the interval collapses onto the point estimate
print(wald_ci(1.0, 0.0, 15))

# the default variance term subtracts the test-group variance and can go
# negative; it is then clamped to zero and flagged
print(wald_ci(0.9, 0.5, 15))

# the textbook interval adds the two variances
lo, hi, _ = wald_ci(0.8125, 0.0, 16, variance_mode="standard-sum")
print(lo, hi, (hi - lo) / 2)

# discriminated when the gap exceeds tau; significant when the whole interval does
for dp, ci in [(0.2, (0.05, 0.35)), (0.2, (-0.1, 0.5)), (0.0, (0.0, 0.0))]:
    print(dp, ci, decide(dp, ci, tau=0.0))

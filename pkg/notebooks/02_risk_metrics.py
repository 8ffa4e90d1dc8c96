"""
Tail risk of a Gaussian belief
==============================

Mean, VaR and CVaR of the same belief as the safety level shrinks.
"""

from riskplan import GaussianBelief, RiskMetric

belief = GaussianBelief(20.0, 16.0)
print(" beta     VaR    CVaR")
for beta in (0.5, 0.2, 0.05, 0.01):
    print(f"{beta:5.2f}  {RiskMetric('var', beta)(belief):6.2f}  {RiskMetric('cvar', beta)(belief):6.2f}")

# lower tail: the optimistic side, mirrored around the mean
print("lower CVaR at 0.05:", round(RiskMetric("cvar", 0.05, "lower")(belief), 2))

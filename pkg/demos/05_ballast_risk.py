# coding: utf-8

# # Ballast water risk
#
# Ships moving between ports with similar water carry a higher invasion risk.
# We bin trips by environmental distance and compare the distribution built
# from observed flows with one built from a coarser guess.

# In[1]:

import numpy as np

from seaflow import bwra

rng = np.random.default_rng(1)
env = {}
for i in range(12):
    lo = rng.uniform(-2, 15)
    hi = lo + rng.uniform(0, 12)
    env[f"p{i}"] = bwra.EnvProfile(lo, hi, rng.uniform(lo, hi), rng.uniform(10, 38))
print(bwra.env_distance(env["p0"], env["p1"]))


# In[2]:

flows = [(a, b, float(rng.integers(1, 50))) for a in env for b in env if a != b and rng.random() < 0.3]
uniform = [(a, b, 1.0) for a, b, _ in flows]
bins = bwra.default_bins(env, width=2.0)
observed = bwra.risk_distribution(flows, env, bins)
guess = bwra.risk_distribution(uniform, env, bins, provenance="uniform")
print("mass per bin", observed.mass)
print("correlation with a uniform guess", round(bwra.compare_distributions(observed, guess), 3))

# coding: utf-8

# # Predicting missing links
#
# Ports that are close and busy tend to be connected. We complete the network
# with pseudo links, score every pair by importance and distance, and fit a
# logistic classifier with a small grid search.

# In[1]:

from seaflow import linkpred, shipnet
from seaflow.synth import generate_synthetic

world = generate_synthetic(n_ports=40, n_regions=4, seed=5)
net = shipnet.build_network(world.trips, world.ports)
cn = shipnet.edge_importance(shipnet.make_complete(net))
print(len(cn), "candidate pairs,", int(cn.real.sum()), "real")


# Pseudo links far outnumber real ones, so sample them down per source region.

# In[2]:

bal = shipnet.stratified_sample_pseudo(cn, seed=1)
X, y, rows = linkpred.link_rows(bal)
print("balanced rows", len(y), "positives", int(y.sum()))


# Importance spans many orders of magnitude. Working in log space keeps a
# single busy pair from flattening the standardized feature.

# In[3]:

cv = linkpred.grid_search_cv(X, y, k=5, seed=0, log_features=True)
print("best", cv["best"], "cv accuracy", round(cv["mean_accuracy"], 3))
model = linkpred.fit_logistic(X, y, seed=0, log_features=True, **cv["best"])
_, pred = linkpred.predict_links(model, X)
print(linkpred.classification_report(pred, y))

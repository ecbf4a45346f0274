# coding: utf-8

# # Shipping networks and port centrality
#
# Build a port-to-port network from a synthetic trip log and look at which
# ports sit on the most shortest routes.

# In[1]:

import numpy as np

from seaflow import shipnet
from seaflow.synth import generate_synthetic

world = generate_synthetic(n_ports=30, n_regions=4, seed=3, noise="multinomial")
net = shipnet.build_network(world.trips, world.ports)
print(len(net), "ports,", len(net.edges), "directed links,", net.total_trips(), "trips")


# Edge weights are trip counts and by default they are used as path costs.
# Passing weight_mode="reciprocal_trips" makes busy lanes the short ones.

# In[2]:

m = shipnet.node_metrics(net)
bc = shipnet.betweenness(net, weight_mode="reciprocal_trips", normalized=True)
top = sorted(bc, key=bc.get, reverse=True)[:5]
for p in top:
    print(f"{p:>5}  betweenness {bc[p]:.3f}  pagerank {m.pagerank[p]:.3f}  closeness {m.closeness[p]:.3f}")


# PageRank sums to one and straightness compares path length with the
# great-circle distance, so both are easy to sanity check.

# In[3]:

print("pagerank total", sum(m.pagerank.values()))
st = np.array(list(m.straightness.values()))
print("straightness range", st.min().round(3), st.max().round(3))

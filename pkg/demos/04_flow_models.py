# coding: utf-8

# # Origin-destination flow models
#
# Each source port spreads its departures over its destinations. We compare
# the classic gravity law, a linear regression, Deep Gravity and the
# transformer model on a synthetic world where the true law is known.

# In[1]:

from seaflow import shipnet
from seaflow.gravity import ModelConfig, OptimConfig, assemble_samples, classic_gravity_fit, train
from seaflow.synth import generate_synthetic

world = generate_synthetic(n_ports=40, n_regions=4, seed=7, noise="multinomial")
net = shipnet.build_network(world.trips, world.ports)
samples = assemble_samples(list(net.edges), net, shipnet.node_metrics(net), trade=world.trade)
print(len(samples), "source ports")


# The classic law recovers the distance exponent directly.

# In[2]:

print("true gamma", world.truth["gamma"], "fitted", round(classic_gravity_fit(samples).gamma, 4))


# Neural models are scored by common part of commuters on held-out folds.
# Epochs are capped here to keep the demo quick.

# In[3]:

optim = OptimConfig(max_epochs=15)
for family in ("linear_regression", "deep_gravity", "transformer_gravity"):
    res = train(ModelConfig(family=family, layers=3), samples, "cv5", seed=0, optim=optim)
    print(f"{family:>20}  mean CPC {res.mean_cpc:.3f}")

# # Positional weights and how they bend attention
#
# Each occurrence gets a Gaussian bump over document positions, centred on
# the occurrence and narrowing with depth.  Semantic neighbours add smaller
# bumps of their own.  The weights then scale raw attention logits.

# In[1]:

import numpy as np

from contextkp.weighting import (
    GaussianSchedule,
    MixtureSpec,
    adjust_logits,
    mixture_weight,
    normalized_center,
    vanilla_weight,
)

np.set_printoptions(precision=3, suppress=True, linewidth=110)

n = 20
schedule = GaussianSchedule(sigma0=0.3, kappa=0.1)
mu = normalized_center([5, 6], n)  # a two-token phrase
print(mu)

# Width shrinks layer by layer:

# In[2]:

for layer in range(4):
    print(layer, round(schedule.sigma(layer), 3), vanilla_weight(mu, schedule.sigma(layer), n))

# With two neighbours further along the document the mixture keeps most of
# its mass on the occurrence itself.

# In[3]:

spec = MixtureSpec.uniform(pi_c=0.7, pi_neighbor=0.15, k_sem=2)
neighbours = [normalized_center([14], n), normalized_center([18], n)]
print(mixture_weight(mu, neighbours, spec, schedule.sigma(0), n))

# Logit adjustment only ever moves a score towards zero, so a weight of 1
# keeps it and a weight of 0 flattens it.  Negative scores are pushed the
# other way, which keeps the ordering monotone in the weight.

# In[4]:

scores = np.array([3.0, 3.0, -2.0, -2.0])
weights = np.array([1.0, 0.25, 1.0, 0.25])
print(adjust_logits(scores, weights))

# coding: utf-8

# # Built-in detuning protocols
#
# Propagate the ground state under each registered protocol and print the final
# target population and the peak intermediate population.

# In[1]:

import numpy as np

from poptransfer import builtin_protocols, ground_state, propagate_schedule, symmetry_report


# In[2]:

for name, proto in builtin_protocols().items():
    T = 20.0 if name.endswith("T20") else 40.0
    res = propagate_schedule(ground_state(), proto, T)
    print(f"{name:16s} T={T:4.0f}  rho_ff={res.final_target:.5f}  max rho_ee={res.max_excited:.5f}")


# Trajectory of the first protocol, sampled every 5 time units.

# In[3]:

res = propagate_schedule(ground_state(), builtin_protocols()["protocol1_T40"], 40.0, n_samples=9)
print(np.round(np.column_stack([res.times, res.populations]), 4))


# In[4]:

print(symmetry_report(builtin_protocols()["protocol1_T40"], 40.0))

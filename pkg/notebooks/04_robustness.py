# coding: utf-8

# # Robustness of a fixed protocol

# In[1]:

import numpy as np

from poptransfer import get_protocol
from poptransfer.experiments import Axis, SweepSpec, dephasing_curves, raman_baseline, scan_total_time, sweep_decay

p1 = get_protocol("protocol1_T40")


# Spontaneous decay on the two ladder transitions.

# In[2]:

ladder = sweep_decay(SweepSpec(p1, 40.0, "ladder", [Axis("gamma_eg", 0, 0.05, 3), Axis("gamma_fe", 0, 0.05, 3)]))
print(np.round(ladder.final_rho_ff, 4))


# In[3]:

for lvl, res in dephasing_curves(p1, 40.0, np.linspace(0, 0.1, 3)).items():
    print(lvl, np.round(res.final_rho_ff, 4))


# In[4]:

scan = scan_total_time(p1, np.linspace(20, 80, 7))
print(np.round(np.column_stack([scan.coords[0], scan.final_rho_ff]), 4))


# In[5]:

raman = raman_baseline(40.0, np.linspace(-10, 10, 21), n_samples=801)
print("best constant-detuning peak:", round(raman.extras["max_rho_ff"].max(), 4), "vs", round(raman.meta["reference"], 4))

# coding: utf-8

# # Derivative-free optimization of parametrized detunings

# In[1]:

import numpy as np

from poptransfer.optimize import PowellConfig, optimize_ansatz, optimize_polynomial, powell_min

# Powell on Rosenbrock as a sanity check.
res = powell_min(lambda x: (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2, [-1.2, 1.0])
print(np.round(res.x, 5), res.n_evals)


# In[2]:

ans = optimize_ansatz(40.0, "ansatz1", PowellConfig(restarts=2, seed=0))
print("ansatz:", round(ans.score, 6), np.round(ans.params, 3))


# In[3]:

poly = optimize_polynomial(40.0, order=3, n_runs=2, cfg=PowellConfig(seed=0))
print("cubic pair:", round(poly.score, 6), [round(s, 6) for s in poly.run_scores])

# coding: utf-8

# # Policy-gradient training of an LSTM controller
#
# A short run of the restricted preset. The full preset takes about ten seconds.

# In[1]:

from poptransfer import transfer_population
from poptransfer.policy import TrainConfig, train

cfg = TrainConfig.restricted(seed=0)
res = train(cfg)


# In[2]:

for epoch in range(0, cfg.n_epochs, max(1, cfg.n_epochs // 10)):
    print(epoch, round(res.curve.mean_reward[epoch], 4), round(res.curve.greedy_reward[epoch], 4))


# The reward during training includes the sink; the greedy schedule also works without it.

# In[3]:

print("best reward with sink:", round(res.best_reward, 4))
print("same schedule without sink:", round(transfer_population(res.best_schedule, cfg.T).final_target, 4))

# %% [markdown]
# # Modeling attacks at desk scale
#
# Small budgets, n=32 challenges.  Logistic regression breaks the arbiter
# PUF outright; on NMQ-RO it, and the degree-2 Fourier learner, stay at
# coin-flip accuracy.  The MLP section is kept short here; the acceptance
# suite runs the 500k-CRP version.

# %%
from nmqpuf.attacks import MlpConfig, fourier_low_degree_attack, train_logistic_regression, train_mlp
from nmqpuf.attacks.cmaes import cmaes_reliability_attack
from nmqpuf.dataset import generate_dataset
from nmqpuf.entropy import InstanceConfig
from nmqpuf.models import APUF, NMQ_RO

desk = InstanceConfig(n=32)


def split(arch, g, m, test, evals=1):
    return generate_dataset(desk, arch, g, 1, m + test, seed=0, evals=evals).split(test, seed=0)


# %%
_, rep = train_logistic_regression(*split(APUF, 0, 10_000, 5000))
print(rep.table_line())
_, rep = train_logistic_regression(*split(NMQ_RO, 200, 50_000, 10_000))
print(rep.table_line(), "|", rep.notes)

# %%
_, rep = fourier_low_degree_attack(*split(NMQ_RO, 200, 200_000, 20_000))
print(rep.table_line())

# %% [markdown]
# The reliability attack needs each challenge measured repeatedly.

# %%
_, rep = cmaes_reliability_attack(*split(APUF, 0, 5000, 1000, evals=11))
print(rep.table_line())

# %%
_, rep = train_mlp(*split(NMQ_RO, 5000, 50_000, 10_000), MlpConfig(max_epochs=5))
print(rep.table_line())

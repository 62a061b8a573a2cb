# %% [markdown]
# # Reliability and the authentication budget
#
# Bit error rates come from repeated noisy evaluations against a 20 C
# enrollment.  The error rate then fixes how many CRPs an authentication
# round needs for a 1 % false-reject rate.

# %%
import numpy as np

from nmqpuf.entropy import InstanceConfig, random_challenges
from nmqpuf.metrics import (auth_failure_probability, bit_error_rate, enroll, margin_threshold,
                            required_crps)
from nmqpuf.models import NMQ_RO, XOR_NMQ_RO, make_puf

cfg = InstanceConfig()
noise = cfg.noise()
c = random_challenges(5000, cfg.n, 0)

# %%
for g in (100, 200, 400):
    puf = make_puf(cfg, NMQ_RO, g)
    rep = bit_error_rate(puf, enroll(puf, c, noise), evals=5, noise=noise)
    print(f"g={g:4d}", " ".join(f"{t:g}C:{b:.3f}" for t, b in zip(rep.temperatures, rep.error_ratio)))

# %% [markdown]
# XORing members multiplies the chances of a flip, so the worst-case error
# grows with k.

# %%
for k in (2, 3):
    puf = make_puf(cfg, XOR_NMQ_RO, 200, k)
    rep = bit_error_rate(puf, enroll(puf, c, noise), evals=5, noise=noise)
    print(f"{k}-XOR worst {rep.worst:.3f}")

# %%
res = auth_failure_probability(0.10, 200, margin_threshold(0.10, 200), trials=200_000, seed=1)
print("threshold", margin_threshold(0.10, 200), "exact", res.exact, "monte carlo", res.monte_carlo)
for ber in (0.1, 0.2, 0.3):
    print(f"BER {ber:.0%}: {required_crps(ber)} CRPs for <= 1 % failure")

# %% [markdown]
# # Non-monotonic quantization, step by step
#
# A ring-oscillator pair is sampled, the trap counter is run both in closed
# form and as a discrete-event simulation, and the response is plotted
# against the period ratio to show the alternating bands.

# %%
import numpy as np

from nmqpuf.entropy import InstanceConfig, random_challenges
from nmqpuf.models import APUF, NMQ_RO, eval_nmq_ro_event_oracle, make_puf
from nmqpuf.plotdata import alternations

cfg = InstanceConfig()
puf = make_puf(cfg, NMQ_RO, g=400)
c = random_challenges(2000, cfg.n, 0)
tr = puf.trace(c)
print("ratio range", tr.ratio.min(), tr.ratio.max())

# %% [markdown]
# The closed form and the event simulation should agree everywhere the
# scaled ratio is not within rounding distance of an integer.

# %%
oracle, toggles = eval_nmq_ro_event_oracle(puf, c)
near = np.abs(tr.scaled - np.round(tr.scaled)) < 1e-6
print("agreement", np.mean(oracle[~near] == tr.response[~near]), "boundary cases", near.sum())
print("toggle counts match", np.array_equal(toggles, tr.toggle_count))

# %% [markdown]
# Sorting by ratio, an arbiter-style comparator would give one step from 1
# to 0.  The NMQ-RO response instead flips every time the scaled ratio
# crosses an integer.

# %%
order = np.argsort(tr.ratio)
print("NMQ-RO alternations:", alternations(tr.response[order]))
apuf = make_puf(cfg, APUF)
diff = apuf.delay_difference(c)
print("APUF alternations:", alternations((diff < 0)[np.argsort(diff)]))

# %%
try:
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 3))
    ax.scatter(tr.ratio[order], tr.response[order], s=2)
    ax.set_xlabel("D_p / D_q")
    ax.set_ylabel("response")
    fig.tight_layout()
    plt.show()
except ImportError:
    pass

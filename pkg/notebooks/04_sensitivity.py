# %% [markdown]
# # How fast does uniqueness saturate?
#
# Perturb an instance's delays along two random directions and measure how
# far its responses drift from the original.  A quick saturation means a
# learner gets little signal from nearby parameter settings.

# %%
import warnings

import numpy as np

from nmqpuf.sensitivity import ordering_fraction, run_preset, xor_sensitivity_means

warnings.simplefilter("ignore", RuntimeWarning)  # clamped delays at large radius

# %%
for key in "acd":
    grid = run_preset(key, resolution=11, n_challenges=2000)
    print(f"{key}: f(0,0)={grid.at(0, 0)} ring={grid.boundary_ring_mean():.3f} "
          f"below 0.45={grid.fraction_below(0.45):.3f}")

# %%
means = xor_sensitivity_means(direction_seeds=range(4))
print(np.round(means, 4))
print("ordered rows:", ordering_fraction(means))

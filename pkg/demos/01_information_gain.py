"""
Information gain on a toy feature
=================================

Entropy, conditional entropy and the information gain that ranks numeric
columns, worked through on tiny arrays.
"""

# %%
# Entropy is in bits.  A fair coin carries one bit; a 2:2:4 split carries 1.5.
import numpy as np

from igrf.info_gain import Discretizer, conditional_entropy, entropy, information_gain

print("H([5,5])   =", entropy([5, 5]))
print("H([2,2,4]) =", entropy([2, 2, 4]))

# %%
# Conditioning on a feature splits the labels into bins.  Here bin ``a`` is
# pure and bin ``b`` is a coin flip, so H(Y|X) = 0.5 * 0 + 0.5 * 1.
print("H(Y|X)     =", conditional_entropy([[4, 0], [2, 2]]))

# %%
# Information gain is the drop from H(Y) to H(Y|X).
x = np.array([0.0] * 4 + [1.0] * 4)
y = np.array([0, 0, 0, 0, 0, 0, 1, 1])
print("IG         =", round(information_gain(x, y, Discretizer(2)), 4))

# %%
# Continuous columns are binned by equal frequency first.  A noisy copy of the
# label keeps most of its information; pure noise keeps almost none.
rng = np.random.default_rng(0)
labels = rng.integers(0, 3, 2000)
noisy = labels + rng.normal(0, 0.6, labels.size)
noise = rng.normal(size=labels.size)
for name, col in (("noisy copy", noisy), ("noise", noise)):
    print(f"{name:<11}", round(information_gain(col, labels), 4), "bits of",
          round(entropy(np.bincount(labels)), 4))

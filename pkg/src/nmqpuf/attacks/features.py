"""Challenge encodings shared by the attacks."""

import numpy as np

from ..models import parity_features


def parity_transform(challenges) -> np.ndarray:
    """Parity features, ``(m, n + 1)``: entry ``i`` is the product of ``1 - 2 c_j`` over ``j >= i``.

    The last entry is the constant +1 and plays the role of a bias, so the
    all-zero challenge maps to all ones.
    """
    return parity_features(challenges)


def pm1(challenges, dtype=np.float64) -> np.ndarray:
    """Bits to +/-1 (0 -> +1, 1 -> -1)."""
    c = np.asarray(challenges)
    return (1 - 2 * c.astype(np.int8)).astype(dtype)

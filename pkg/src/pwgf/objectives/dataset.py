"""Fixed Monte-Carlo datasets backing the neural objectives."""

from __future__ import annotations

import numpy as np

from ..errors import ContractViolationError


class Dataset:
    """M i.i.d. standard-normal inputs z in R^l, frozen at construction.

    Expectations E_z in the objectives are plain means over these samples,
    so every quantity derived from a Dataset is deterministic given the
    seed.  Minibatch modes subsample rows by index without regenerating.
    """

    __slots__ = ("samples", "seed")

    def __init__(self, dim: int, size: int, seed: int):
        if size < 1 or dim < 1:
            raise ContractViolationError(f"dataset needs size >= 1 and dim >= 1, got {size}, {dim}")
        rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
        samples = rng.standard_normal((size, dim))
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "seed", int(seed))

    def __setattr__(self, name, value):
        raise AttributeError("Dataset is immutable")

    @property
    def size(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    def subset(self, indices) -> np.ndarray:
        """Rows selected by a minibatch index array (no copy of the rest)."""
        return self.samples[np.asarray(indices, dtype=int)]


def sigmoid(t: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function (branch-free)."""
    q = np.exp(-np.abs(t))
    return np.where(t >= 0, 1.0, q) / (1.0 + q)


def sigmoid_d1(s: np.ndarray) -> np.ndarray:
    """sigma' expressed through sigma: s (1 - s)."""
    return s * (1.0 - s)


def sigmoid_d2(s: np.ndarray) -> np.ndarray:
    """sigma'' expressed through sigma: s (1 - s) (1 - 2 s)."""
    return s * (1.0 - s) * (1.0 - 2.0 * s)
